"""The generating operator: base orthogonal systems, the substitution maps
u_p and v_p^r, one transform step, and its fold over an index path.

A member of the generation with path (p_1, ..., p_s) is built by folding
the one-step transform from the innermost index outwards:

    f^{p_1..p_s}(t) = f^{p_1..p_{s-1}}(u_{p_s}(t)) * prod_{r<p_s} |Z~(v_{p_s}^r(t))|
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.interpolate import CubicSpline

from .ladder import IterationTower, JacobsLadder, build_tower
from .zeta_core import hardy_z

# slack for points pushed out of [a, a+2l] by root-finder rounding
_EDGE_TOL = 1e-9


def legendre(n: int, x):
    """P_n(x) by the three-term recurrence; |x| <= 1."""
    x = np.asarray(x, dtype=float)
    if np.any(np.abs(x) > 1):
        raise ValueError("domain error: Legendre argument outside [-1, 1]")
    return legendre_all(n, x)[..., n]


def legendre_all(N: int, x) -> np.ndarray:
    """P_0..P_N at x, stacked on the last axis."""
    x = np.asarray(x, dtype=float)
    out = np.empty(x.shape + (N + 1,))
    out[..., 0] = 1.0
    if N >= 1:
        out[..., 1] = x
    for n in range(1, N):
        out[..., n + 1] = ((2 * n + 1) * x * out[..., n] - n * out[..., n - 1]) / (n + 1)
    return out


def _clip_interval(t, a, l):
    t = np.asarray(t, dtype=float)
    tol = _EDGE_TOL * max(1.0, abs(a) + 2 * l)
    if np.any(t < a - tol) or np.any(t > a + 2 * l + tol):
        raise ValueError(f"domain error: t outside [{a}, {a + 2 * l}]")
    return np.clip(t, a, a + 2 * l)


@dataclass(frozen=True)
class BaseSystem:
    """An orthogonal system {f_n} on [a, a+2l].

    ``eval_all(N, t)`` returns f_0..f_N at t on the last axis; ``norm_sq(n)``
    is the known squared norm, or None when unknown.
    """

    name: str
    a: float
    l: float
    eval_all: Callable[[int, np.ndarray], np.ndarray]
    norm_sq: Optional[Callable[[int], float]] = None

    @property
    def interval(self) -> tuple[float, float]:
        return self.a, self.a + 2 * self.l

    def eval(self, n: int, t):
        return self.eval_all(n, t)[..., n]


def legendre_system(a: float = -1.0, l: float = 1.0) -> BaseSystem:
    """Legendre polynomials moved affinely onto [a, a+2l]."""
    def eval_all(N, t):
        x = (_clip_interval(t, a, l) - a) / l - 1.0
        return legendre_all(N, np.clip(x, -1.0, 1.0))
    return BaseSystem("legendre", a, l, eval_all, lambda n: 2 * l / (2 * n + 1))


def cosine_system(a: float = -1.0, l: float = 1.0) -> BaseSystem:
    """cos(n pi (t - a) / (2l)), n >= 0, on [a, a+2l]."""
    def eval_all(N, t):
        s = (_clip_interval(t, a, l) - a) / (2 * l)
        return np.cos(math.pi * s[..., None] * np.arange(N + 1))
    return BaseSystem("cosine", a, l, eval_all, lambda n: 2 * l if n == 0 else l)


def tabulated_system(t, samples, name: str = "tabulated", check_orthogonality: bool = True,
                     tol: float = 1e-6) -> BaseSystem:
    """System from samples ``samples[i, n] = f_n(t[i])`` (cubic spline between).

    With ``check_orthogonality`` the members 0..min(N, 8) are integrated
    pairwise and registration fails when an off-diagonal entry exceeds
    ``tol`` times the largest diagonal one.
    """
    t = np.asarray(t, dtype=float)
    samples = np.asarray(samples, dtype=float)
    if samples.ndim == 1:
        samples = samples[:, None]
    a, b = float(t[0]), float(t[-1])
    l = 0.5 * (b - a)
    spline = CubicSpline(t, samples, axis=0)
    n_avail = samples.shape[1] - 1

    def eval_all(N, x):
        if N > n_avail:
            raise ValueError(f"tabulated system has members 0..{n_avail} only")
        return spline(_clip_interval(x, a, l))[..., :N + 1]

    system = BaseSystem(name, a, l, eval_all, None)
    if check_orthogonality:
        from .harness import QuadratureSpec, integrate
        M = min(n_avail, 8)

        def products(x):
            v = eval_all(M, x)
            return (v[:, :, None] * v[:, None, :]).reshape(len(x), -1)

        gram, _ = integrate(products, a, b, QuadratureSpec(abs_tol=1e-10, kink_hints=list(t[1:-1])))
        gram = gram.reshape(M + 1, M + 1)
        off = np.abs(gram - np.diag(np.diag(gram))).max() if M else 0.0
        if off > tol * np.abs(np.diag(gram)).max():
            raise ValueError(f"tabulated system is not orthogonal: max off-diagonal {off:.3g}")
    return system


BASE_SYSTEMS = {"legendre": legendre_system, "cosine": cosine_system}


TABULATED_PREFIX = "tabulated:"


def read_system_csv(path: str, check_orthogonality: bool = True) -> BaseSystem:
    """Tabulated system from a CSV of rows ``t,f_0,...,f_N`` ('#' lines skipped),
    the shape written by the ``generate`` command."""
    try:
        data = np.loadtxt(path, delimiter=",", comments="#", ndmin=2)
    except (OSError, ValueError) as exc:
        raise ValueError(f"{path}: cannot read tabulated system ({exc})") from exc
    if data.shape[0] < 4 or data.shape[1] < 2:
        raise ValueError(f"{path}: need at least 4 rows of t,f_0,...")
    if not np.all(np.diff(data[:, 0]) > 0):
        raise ValueError(f"{path}: t column must increase strictly")
    return tabulated_system(data[:, 0], data[:, 1:], name=f"{TABULATED_PREFIX}{path}",
                            check_orthogonality=check_orthogonality)


def make_base(name: str, a: float, l: float) -> BaseSystem:
    """Named base system on [a, a+2l]; ``tabulated:<csv>`` reads samples."""
    if name.startswith(TABULATED_PREFIX):
        sys_ = read_system_csv(name[len(TABULATED_PREFIX):])
        if not np.allclose(sys_.interval, (a, a + 2 * l), rtol=0, atol=1e-12):
            raise ValueError(f"{name}: samples cover {sys_.interval}, expected {(a, a + 2 * l)}")
        return sys_
    try:
        return BASE_SYSTEMS[name](a, l)
    except KeyError:
        raise ValueError(f"unknown base system {name!r}; choose from {sorted(BASE_SYSTEMS)} "
                         f"or {TABULATED_PREFIX}<csv>") from None


# ---------------------------------------------------------------------------
# substitution maps
# ---------------------------------------------------------------------------

def _segment_map(t, p, tower: IterationTower, a, l):
    """Affine map of [a, a+2l] onto the p-th reverse-iteration segment."""
    lo, hi = tower.segment(p)
    return (hi - lo) / (2 * l) * (t - a) + lo


def _check_index(p, tower):
    if not 1 <= p <= tower.k:
        raise ValueError(f"index p={p} must be in 1..{tower.k}")


def v_map(t, p: int, r: int, tower: IterationTower, a: float, l: float, ladder: JacobsLadder):
    """v_p^r(t) = phi_1^r(affine_p(t)), which lies in the (p - r)-th segment."""
    _check_index(p, tower)
    if not 0 <= r <= p - 1:
        raise ValueError(f"r={r} must be in 0..{p - 1}")
    t = _clip_interval(t, a, l)
    return ladder.phi1_iter(_segment_map(t, p, tower, a, l), r)


def _pin(x, p, tower: IterationTower, a, l, ladder):
    """Send phi_1^p-images onto [a, a+2l] so the computed segment ends land
    exactly on a and a+2l. In exact arithmetic this is x - T + a; in floating
    point it removes the few-ulp endpoint defect that steep compositions
    would otherwise amplify."""
    A, B = tower.image_ends(p, ladder)
    return (x - A) * (2 * l / (B - A)) + a


def pin_defect(p: int, tower: IterationTower, l: float, ladder: JacobsLadder) -> float:
    """Largest distance of the unpinned segment-end images from T and T+2l."""
    A, B = tower.image_ends(p, ladder)
    return max(abs(A - tower.T), abs(B - tower.T - 2 * l))


def u_map(t, p: int, tower: IterationTower, a: float, l: float, ladder: JacobsLadder):
    """u_p(t) = phi_1^p(affine_p(t)) - T + a, an increasing self-map of [a, a+2l]."""
    _check_index(p, tower)
    t = _clip_interval(t, a, l)
    return _pin(ladder.phi1_iter(_segment_map(t, p, tower, a, l), p), p, tower, a, l, ladder)


def u_inverse(w, p: int, tower: IterationTower, a: float, l: float, ladder: JacobsLadder):
    """Inverse of :func:`u_map`."""
    lo, hi = tower.segment(p)
    A, B = tower.image_ends(p, ladder)
    x = (np.asarray(w, dtype=float) - a) * ((B - A) / (2 * l)) + A
    rho = ladder.phi1_inverse_iter(x, p)
    return (np.asarray(rho) - lo) * (2 * l) / (hi - lo) + a


def step_maps(t, p: int, tower: IterationTower, a: float, l: float, ladder: JacobsLadder):
    """u_p(t) and prod_{r<p} |Z~(v_p^r(t))| in one pass.

    Shares the iterates x_r = v_p^r(t): omega at x_r is F'(phi_1(x_r)) = F'(x_{r+1}).
    """
    _check_index(p, tower)
    t = _clip_interval(t, a, l)
    x = np.atleast_1d(_segment_map(t, p, tower, a, l))
    weight = np.ones_like(x)
    fprime = ladder.constants.F_prime
    for _ in range(p):
        nxt = np.asarray(ladder.phi1(x))
        weight *= np.abs(hardy_z(x, ladder.config)) / np.sqrt(fprime(nxt))
        x = nxt
    u = np.clip(_pin(x, p, tower, a, l, ladder), a, a + 2 * l)
    return u, weight


def g_step(f: Callable, p: int, tower: IterationTower, a: float, l: float,
           ladder: JacobsLadder) -> Callable:
    """One application of the operator with index p.

    ``f`` maps an array of t to values (optionally with trailing member
    axes); the result is t -> f(u_p(t)) * prod_r |Z~(v_p^r(t))|.
    """
    def stepped(t):
        t = np.asarray(t, dtype=float)
        u, w = step_maps(np.atleast_1d(t), p, tower, a, l, ladder)
        vals = np.asarray(f(u))
        w = w.reshape(w.shape + (1,) * (vals.ndim - 1))
        out = vals * w
        return out.reshape(t.shape + out.shape[1:]) if t.ndim == 0 else out
    return stepped


# ---------------------------------------------------------------------------
# generated systems
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GeneratedSystem:
    base: BaseSystem
    path: tuple
    k: int
    T: float
    ladder: JacobsLadder = field(repr=False)
    tower: IterationTower = field(repr=False, default=None)

    def __post_init__(self):
        object.__setattr__(self, "path", tuple(int(p) for p in self.path))
        if self.k < 1:
            raise ValueError("k must be >= 1")
        bad = [p for p in self.path if not 1 <= p <= self.k]
        if bad:
            raise ValueError(f"path entries {bad} outside 1..{self.k}")
        if self.tower is None:
            object.__setattr__(self, "tower", build_tower(self.T, self.k, self.base.l, self.ladder))
        elif (self.tower.T, self.tower.k, self.tower.l) != (self.T, self.k, self.base.l):
            raise ValueError("tower does not match (T, k, l) of the system")

    @property
    def a(self) -> float:
        return self.base.a

    @property
    def l(self) -> float:
        return self.base.l

    @property
    def s(self) -> int:
        return len(self.path)

    def members_fn(self, N: int) -> Callable:
        """t -> array (len(t), N+1) of f_0^{path} .. f_N^{path}."""
        fn = lambda t: self.base.eval_all(N, t)  # noqa: E731
        for p in self.path:
            fn = g_step(fn, p, self.tower, self.a, self.l, self.ladder)
        return fn

    def members(self, N: int, t) -> np.ndarray:
        return self.members_fn(N)(np.atleast_1d(np.asarray(t, dtype=float)))

    def segment_length(self, p: int) -> float:
        lo, hi = self.tower.segment(p)
        return hi - lo


def make_system(base: BaseSystem, path: Sequence[int], k: int, T: float,
                ladder: JacobsLadder, tower: IterationTower | None = None) -> GeneratedSystem:
    return GeneratedSystem(base=base, path=tuple(path), k=k, T=T, ladder=ladder, tower=tower)


def generate_member(sys: GeneratedSystem, n: int, t):
    """f_n^{p_1..p_s}(t) by folding the one-step transform."""
    t_arr = np.asarray(t, dtype=float)
    vals = sys.members(n, t_arr)[..., n]
    return float(vals[0]) if t_arr.ndim == 0 else vals


def normalization_factor(sys: GeneratedSystem) -> float:
    """prod_j sqrt(len_{p_j} / 2l); makes the members of an orthonormal base
    orthonormal again (one factor per transform step)."""
    out = 1.0
    for p in sys.path:
        out *= math.sqrt(sys.segment_length(p) / (2 * sys.l))
    return out


def normalization_factors(sys: GeneratedSystem, N: int) -> np.ndarray:
    """Per-member factors: path factor times 1/sqrt(norm_sq(n)) of the base."""
    if sys.base.norm_sq is None:
        raise ValueError(f"base system {sys.base.name!r} has no known norms")
    base = np.array([1.0 / math.sqrt(sys.base.norm_sq(n)) for n in range(N + 1)])
    return normalization_factor(sys) * base


def enumerate_paths(k: int, s: int):
    """All index paths of the s-th generation: k**s of them."""
    return list(itertools.product(range(1, k + 1), repeat=s))


def generation(base: BaseSystem, k: int, s: int, T: float, ladder: JacobsLadder):
    """Every system of the s-th generation, sharing one tower."""
    tower = build_tower(T, k, base.l, ladder)
    return [make_system(base, path, k, T, ladder, tower) for path in enumerate_paths(k, s)]


def kink_hints(sys: GeneratedSystem, step: float = 0.05) -> list[float]:
    """Points of [a, a+2l] where some |Z~| factor of the members vanishes.

    Zeros of Z inside each reverse-iteration segment are found once and
    pulled back through the maps of every level of the path.
    """
    from .zeta_core import find_zeros

    zeros = {}
    for r in range(sys.tower.k + 1):
        lo, hi = sys.tower.segment(r)
        zeros[r] = find_zeros(lo, hi, step=step, config=sys.ladder.config)
    a, l, tower, ladder = sys.a, sys.l, sys.tower, sys.ladder
    hints = []
    for level, p in enumerate(sys.path):
        pts = []
        for r in range(p):
            z = zeros[p - r]
            if z.size:
                rho = np.asarray(ladder.phi1_inverse_iter(z, r))
                lo, hi = tower.segment(p)
                pts.append((rho - lo) * (2 * l) / (hi - lo) + a)
        if not pts:
            continue
        w = np.concatenate(pts)
        # pull back through u_{p_{level+1}}, ..., u_{p_s}
        for q in sys.path[level + 1:]:
            w = np.atleast_1d(u_inverse(w, q, tower, a, l, ladder))
        hints.extend(w.tolist())
    lo, hi = a, a + 2 * l
    return sorted(h for h in hints if lo < h < hi)
