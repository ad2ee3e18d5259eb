"""Jacob's ladder phi_1 built from |zeta(1/2+it)|^2, the generating operator
on orthogonal systems, and a numerical verification harness."""
from .zeta_core import (
    DEFAULT_CONFIG,
    EULER_GAMMA,
    ZetaEngineConfig,
    find_zeros,
    hardy_z,
    hardy_z_oracle,
    riemann_siegel_theta,
    zeta_abs_sq,
    zeta_oracle,
)
from .hl_table import (
    CacheError,
    HLTable,
    build_table,
    check_ingham,
    extend_table,
    hl_integral,
    invert_hl,
    load_table,
)
from .ladder import (
    DEFAULT_C0,
    DomainEscapeError,
    IterationTower,
    JacobsLadder,
    LadderConstants,
    build_tower,
    calibrate_c0,
    check_tower_geometry,
    phi1,
    phi1_inverse,
    phi1_iter,
    smallness_bound,
    ztilde_sq,
)
from .generator import (
    BaseSystem,
    GeneratedSystem,
    cosine_system,
    enumerate_paths,
    g_step,
    generate_member,
    generation,
    legendre,
    legendre_system,
    make_base,
    make_system,
    normalization_factor,
    read_system_csv,
    tabulated_system,
    pin_defect,
    u_inverse,
    u_map,
    v_map,
)
from .harness import (
    GramReport,
    QuadratureError,
    QuadratureSpec,
    check_automorphism,
    check_lemma1,
    check_theorem_equality_chain,
    gram_matrix,
    integrate,
)

__version__ = "0.1.0"
