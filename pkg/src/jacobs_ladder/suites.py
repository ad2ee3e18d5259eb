"""Property suites run by ``verify`` and by the acceptance tests.

Each suite takes a :class:`SuiteContext` and returns a list of v1 report
dicts. Random sampling draws from ``numpy.random.default_rng(seed)`` so a
fixed seed reproduces every report exactly.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .generator import (enumerate_paths, generation, legendre_system, make_base,
                        normalization_factors)
from .harness import (GRAM_SPEC, check_automorphism, check_lemma1,
                      check_theorem_equality_chain, gram_matrix, report)
from .hl_table import check_ingham
from .ladder import JacobsLadder, build_tower, check_tower_geometry
from .zeta_core import ZetaEngineConfig, find_zeros, hardy_z, hardy_z_oracle

# central-difference step for the derivative check; the 5-point stencil's
# h^4 truncation and rounding/h balance near h = 1e-3 at t ~ 1e4
FD_STEP = 1e-3


@dataclass
class SuiteContext:
    ladder: JacobsLadder
    T: float = 1e4
    k: int = 3
    s: int = 2
    a: float = -1.0
    l: float = 1.0
    base: str = "legendre"
    N: int = 8
    seed: int = 0
    _systems: dict = field(default_factory=dict, repr=False)

    def rng(self, salt: int) -> np.random.Generator:
        # one independent stream per suite, so --only does not shift samples
        return np.random.default_rng([self.seed, salt])

    def systems(self):
        """All generated systems with 0 < len(path) <= s, one shared tower."""
        if not self._systems:
            base = make_base(self.base, self.a, self.l)
            for s in range(1, self.s + 1):
                for sys in generation(base, self.k, s, self.T, self.ladder):
                    self._systems[sys.path] = sys
        return list(self._systems.values())


# ---------------------------------------------------------------------------

def suite_zeta(ctx: SuiteContext, n: int = 1000, lo: float = 50.0, hi: float = 1e4) -> list:
    """Fast Z against the Euler-Maclaurin oracle, and the first three zeros."""
    cfg = ctx.ladder.config
    t = np.sort(ctx.rng(1).uniform(lo, hi, n))
    fast = np.abs(hardy_z(t, cfg))
    slow = np.abs(hardy_z_oracle(t, cfg))
    rel = np.abs(fast - slow) / slow
    worst = int(np.argmax(rel))
    out = [report("zeta_vs_oracle", {"n": n, "range": [lo, hi], "seed": ctx.seed},
                  [float(rel.max()), float(np.median(rel))], [float(rel[worst])], 0.0,
                  rel.max() < 1e-6)]
    # zeros through the Riemann-Siegel path, against zeros of the oracle
    rs_cfg = ZetaEngineConfig(rs_correction_order=cfg.rs_correction_order,
                              oracle_terms=cfg.oracle_terms, min_t=10.0)
    fast_z = find_zeros(10.0, 26.0, config=rs_cfg)[:3]
    slow_z = find_zeros(10.0, 26.0, func=lambda x: hardy_z_oracle(x, cfg))[:3]
    err = np.abs(fast_z - slow_z) if fast_z.size == slow_z.size == 3 else np.array([np.inf])
    out.append(report("zeta_zeros", {"range": [10.0, 26.0]}, fast_z.tolist(),
                      err.tolist(), 0.0, bool(np.all(err < 1e-4))))
    return out


def suite_ladder(ctx: SuiteContext, n: int = 100) -> list:
    """F(phi_1(T)) = G(T), and Z~^2 against 5-point differences of phi_1."""
    L = ctx.ladder
    rng = ctx.rng(2)
    T = np.sort(rng.uniform(1e3, 1e4, n))
    G = np.asarray(L.G(T))
    lhs = np.asarray(L.constants.F(L.phi1(T)))
    rel = np.abs(lhs - G) / G
    out = [report("ladder_defining_relation", {"n": n, "range": [1e3, 1e4]},
                  [float(rel.max())], rel.tolist(), 0.0, rel.max() < 1e-11)]

    t = np.sort(rng.uniform(1e3, 1e4, 4 * n))
    t = t[np.abs(hardy_z(t, L.config)) > 0.1]
    h = FD_STEP
    fd = (-np.asarray(L.phi1(t + 2 * h)) + 8 * np.asarray(L.phi1(t + h))
          - 8 * np.asarray(L.phi1(t - h)) + np.asarray(L.phi1(t - 2 * h))) / (12 * h)
    zt = np.asarray(L.ztilde_sq(t))
    rel_d = np.abs(fd - zt) / zt
    out.append(report("ladder_derivative", {"n": int(t.size), "h": h, "stencil": 5},
                      [float(rel_d.max())], [float(np.median(rel_d))], 0.0,
                      rel_d.max() < 1e-5))
    return out


LEMMA_FUNCTIONS = {
    "1": lambda t: np.ones_like(np.asarray(t, dtype=float)),
    "t": lambda t: np.asarray(t, dtype=float),
    "t^2": lambda t: np.asarray(t, dtype=float) ** 2,
}


def suite_lemma1(ctx: SuiteContext, U: float | None = None, tol: float = 1e-7) -> list:
    U = 2 * ctx.l if U is None else U
    out = []
    for p in range(1, min(ctx.k, 3) + 1):
        for name, g in LEMMA_FUNCTIONS.items():
            out.append(check_lemma1(g, ctx.T, U, p, ctx.ladder, tol=tol, name=name))
    return out


def suite_chain(ctx: SuiteContext, pairs=((0, 1), (2, 5), (3, 3))) -> list:
    base = legendre_system(ctx.a, ctx.l) if ctx.base == "legendre" else make_base(
        ctx.base, ctx.a, ctx.l)
    tower = build_tower(ctx.T, ctx.k, ctx.l, ctx.ladder)
    out = []
    for p in range(1, ctx.k + 1):
        for m, n in pairs:
            if max(m, n) > ctx.N:
                continue
            r = check_theorem_equality_chain(
                lambda x, m=m: base.eval(m, x), lambda x, n=n: base.eval(n, x),
                ctx.T, p, ctx.a, ctx.l, ctx.ladder, tower=tower)
            r["inputs"]["pair"] = [m, n]
            out.append(r)
    return out


def suite_gram(ctx: SuiteContext, rel_tol: float = 1e-6) -> list:
    """Orthogonality of every generated system with 1 <= s' <= s."""
    out = []
    for sys in ctx.systems():
        g = gram_matrix(sys, ctx.N, GRAM_SPEC)
        inputs = {"path": list(sys.path), "T": ctx.T, "k": ctx.k, "N": ctx.N,
                  "base": ctx.base, "normalized": False}
        out.append(g.as_report(inputs, rel_tol))
    return out


def suite_normalization(ctx: SuiteContext, tol: float = 1e-5) -> list:
    """Diagonals of the normalized systems lie in [1 - tol, 1 + tol]."""
    out = []
    for sys in ctx.systems():
        g = gram_matrix(sys, ctx.N, GRAM_SPEC, normalize=True)
        dev = np.abs(g.diag - 1.0)
        out.append(report("normalization", {"path": list(sys.path), "N": ctx.N,
                                            "factors": normalization_factors(sys, ctx.N).tolist()},
                          g.diag.tolist(), dev.tolist(), g.est_quad_error,
                          (not g.flagged) and dev.max() <= tol))
    return out


def suite_automorphism(ctx: SuiteContext, n_pairs: int = 100) -> list:
    rng = ctx.rng(3)
    return [check_automorphism(sys, rng, n_pairs) for sys in ctx.systems()]


def suite_tower(ctx: SuiteContext, window=(0.8, 1.2)) -> list:
    tower = build_tower(ctx.T, ctx.k, ctx.l, ctx.ladder)
    geo = check_tower_geometry(tower, ctx.ladder.constants.c)
    ng = np.array(geo["normalized_gaps"])
    ok = geo["ordered"] and geo["lengths_small"] and bool(
        np.all((ng >= window[0]) & (ng <= window[1])))
    return [report("tower_geometry", {"T": ctx.T, "k": ctx.k, "l": ctx.l, "window": list(window)},
                   tower.endpoints_lo.tolist() + tower.endpoints_hi.tolist(),
                   ng.tolist(), 0.0, ok)]


# regression baseline for max |R(T)| / (sqrt(T) ln T) over T = 500, 1000, ..., 1e4
INGHAM_RATIO_BASELINE = 0.1375


def suite_ingham(ctx: SuiteContext, T_max: float = 1e4, bound: float = 0.2,
                 T_step: float = 500.0) -> list:
    """R(T) / (sqrt(T) ln T) stays bounded; |R| / main < 1% at the top."""
    ctx.ladder.ensure_coverage(T_max)
    Ts = np.arange(500.0, T_max + 1, T_step)
    res = check_ingham(Ts, ctx.ladder.table)
    ratio = np.abs(res["ratio"])
    top = res["rel_to_main"][-1]
    return [report("ingham", {"T": [float(Ts[0]), float(Ts[-1])], "count": int(Ts.size),
                              "bound": bound, "baseline": INGHAM_RATIO_BASELINE},
                   [float(ratio.max()), float(top)], ratio.tolist(), 0.0,
                   ratio.max() <= bound and top < 0.01)]


def suite_counting(ctx: SuiteContext, cases=((2, 2), (3, 2), (2, 3))) -> list:
    out = []
    for k, s in cases:
        paths = enumerate_paths(k, s)
        distinct = len(set(paths)) == len(paths)
        out.append(report("counting", {"k": k, "s": s}, [len(paths)],
                          [len(paths) - k ** s], 0.0, distinct and len(paths) == k ** s))
    return out


SUITES = {
    "zeta": suite_zeta,
    "ladder": suite_ladder,
    "lemma1": suite_lemma1,
    "chain": suite_chain,
    "gram": suite_gram,
    "normalization": suite_normalization,
    "automorphism": suite_automorphism,
    "tower": suite_tower,
    "ingham": suite_ingham,
    "counting": suite_counting,
}


def run_suites(ctx: SuiteContext, only=None) -> dict:
    names = list(SUITES) if not only else list(only)
    unknown = [n for n in names if n not in SUITES]
    if unknown:
        raise ValueError(f"unknown suite(s) {unknown}; choose from {sorted(SUITES)}")
    return {name: SUITES[name](ctx) for name in names}


def all_passed(results: dict) -> bool:
    return all(r["pass"] for reps in results.values() for r in reps)
