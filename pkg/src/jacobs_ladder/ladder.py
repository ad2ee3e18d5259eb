"""Canonical Jacob's ladder phi_1, its derivative, iterations and towers.

phi_1(T) is the solution y >= y_min of

    F(y) = y ln y + (c - ln 2 pi) y + c0 = G(T),

G being the Hardy-Littlewood integral. Differentiating gives
phi_1'(T) = Z(T)^2 / (ln phi_1(T) + 1 + c - ln 2 pi) exactly, which is the
``ztilde_sq`` used everywhere downstream.
"""
from __future__ import annotations

import math
import threading
import warnings
from dataclasses import dataclass, field

import numpy as np

from .hl_table import GL_ORDER, HLTable, extend_table, hl_integral, invert_hl
from .zeta_core import EULER_GAMMA, LOG_2PI, hardy_z

# Laplace-transform constant of |zeta|^2 (mean value of the Ingham error term).
DEFAULT_C0 = math.pi

TOWER_SMALLNESS = 0.01


class DomainEscapeError(ValueError):
    """An iterate left the ladder's certified domain."""


@dataclass(frozen=True)
class LadderConstants:
    c: float = EULER_GAMMA
    c0: float = DEFAULT_C0
    y_min: float = 10.0

    def __post_init__(self):
        turn = 2 * math.pi * math.exp(-self.c - 1)
        if not self.y_min > turn:
            raise ValueError(f"y_min must exceed {turn:.6f} so that F is increasing")

    def F(self, y):
        y = np.asarray(y, dtype=float)
        return y * np.log(y) + (self.c - LOG_2PI) * y + self.c0

    def F_prime(self, y):
        return np.log(np.asarray(y, dtype=float)) + 1 + self.c - LOG_2PI


def invert_F(target, const: LadderConstants, max_iter: int = 100):
    """Unique y >= y_min with F(y) = target, by Newton on the convex F.

    Starting right of the root, Newton on an increasing convex function
    decreases monotonically onto it; iteration stops once the step is at
    rounding level.
    """
    target = np.asarray(target, dtype=float)
    f_min = float(const.F(const.y_min))
    if np.any(target < f_min):
        raise ValueError(
            f"domain error: G(T)={np.min(target):.6g} below F(y_min)={f_min:.6g}")
    y = np.maximum(target, const.y_min)  # F(y) >= y for y >= y_min > e^(1.26)
    y = np.where(const.F(y) < target, 2 * y, y)
    prev = np.full(y.shape, np.inf)
    done = np.zeros(y.shape, dtype=bool)
    for _ in range(max_iter):
        step = (const.F(y) - target) / const.F_prime(y)
        y_new = np.maximum(y - step, const.y_min)
        moved = np.abs(y_new - y)
        # exact Newton steps shrink; once they stop shrinking at rounding
        # level the iterate is as good as double precision allows
        conv = (moved <= 2 * np.spacing(y)) | ((moved >= prev) & (moved <= 1e-12 * y))
        y = np.where(done, y, y_new)
        prev = moved
        done |= conv
        if done.all():
            break
    else:
        raise ArithmeticError("F inversion did not converge")
    return y


@dataclass
class JacobsLadder:
    """phi_1 built on a Hardy-Littlewood table.

    The table is replaced (never mutated) when the ladder has to extend it;
    extension is serialised by a lock so readers see an old or a new table.
    """

    table: HLTable
    constants: LadderConstants = field(default_factory=LadderConstants)
    auto_extend: bool = True
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    @property
    def config(self):
        return self.table.config

    @property
    def T_lo(self) -> float:
        return float(invert_hl(float(self.constants.F(self.constants.y_min)), self.table)[0])

    @property
    def T_hi(self) -> float:
        return self.table.t_max

    @property
    def T_domain(self) -> tuple[float, float]:
        return self.T_lo, self.T_hi

    def ensure_coverage(self, T_max: float):
        if T_max <= self.table.t_max:
            return
        if not self.auto_extend:
            raise ValueError(f"T={T_max} beyond certified range {self.table.t_max}")
        with self._lock:
            if T_max > self.table.t_max:
                self.table = extend_table(self.table, T_max)

    def G(self, T):
        T = np.asarray(T, dtype=float)
        if T.size:
            self.ensure_coverage(float(np.max(T)))
        return hl_integral(T, self.table)

    # -- the ladder ------------------------------------------------------
    def phi1(self, T):
        return _as_out(invert_F(self.G(T), self.constants), T)

    def omega(self, t):
        return self.constants.F_prime(self.phi1(t))

    def ztilde_sq(self, t):
        t = np.asarray(t, dtype=float)
        z = hardy_z(t, self.config)
        return _as_out(z * z / self.constants.F_prime(self.phi1(t)), t)

    def phi1_iter(self, t, p: int):
        if p < 0:
            raise ValueError("p must be >= 0")
        x = np.asarray(t, dtype=float)
        lo = None
        for _ in range(p):
            x = np.asarray(self.phi1(x))
            lo = self.T_lo if lo is None else lo
            if np.any(x < lo):
                raise DomainEscapeError(f"iterate {np.min(x):.6g} fell below T_lo={lo:.6g}")
        return _as_out(x, t)

    def phi1_inverse(self, y):
        y = np.asarray(y, dtype=float)
        target = self.constants.F(y)
        top = float(np.max(target))
        while top > self.table.values[-1]:
            if not self.auto_extend:
                raise ValueError(f"y={np.max(y)} exceeds the certified range")
            guess = max(self.table.t_max * 1.05, _guess_T(top) * 1.02 + 10.0)
            self.ensure_coverage(guess)
        return _as_out(invert_hl(np.atleast_1d(target), self.table), y)

    def phi1_inverse_iter(self, y, p: int):
        x = np.asarray(y, dtype=float)
        for _ in range(p):
            x = np.asarray(self.phi1_inverse(x))
        return _as_out(x, y)


def _as_out(x, like):
    x = np.asarray(x)
    if np.ndim(like) == 0:
        return float(x.reshape(-1)[0])
    return x.reshape(np.shape(like))


def _guess_T(G_target: float) -> float:
    # T ln T ~ G; two fixed-point steps are plenty for a coverage estimate
    T = G_target / max(math.log(G_target), 1.0)
    for _ in range(4):
        T = G_target / max(math.log(T) + 2 * EULER_GAMMA - 1 - LOG_2PI, 1.0)
    return T


# module-level forms ------------------------------------------------------

def phi1(T, ladder: JacobsLadder):
    return ladder.phi1(T)


def ztilde_sq(t, ladder: JacobsLadder):
    return ladder.ztilde_sq(t)


def phi1_iter(t, p: int, ladder: JacobsLadder):
    return ladder.phi1_iter(t, p)


def phi1_inverse(y, ladder: JacobsLadder):
    return ladder.phi1_inverse(y)


# ---------------------------------------------------------------------------
# reverse-iteration towers
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class IterationTower:
    T: float
    k: int
    l: float
    endpoints_lo: np.ndarray
    endpoints_hi: np.ndarray
    _images: dict = field(default_factory=dict, repr=False, compare=False)

    def image_ends(self, r: int, ladder: "JacobsLadder") -> tuple[float, float]:
        """Computed phi_1^r of the r-th segment ends; T and T+2l up to rounding."""
        if r not in self._images:
            ends = np.asarray(ladder.phi1_iter(np.array(self.segment(r)), r), dtype=float)
            self._images[r] = (float(ends[0]), float(ends[1]))
        return self._images[r]

    @property
    def lengths(self) -> np.ndarray:
        return self.endpoints_hi - self.endpoints_lo

    @property
    def gaps(self) -> np.ndarray:
        return self.endpoints_lo[1:] - self.endpoints_hi[:-1]

    def segment(self, r: int) -> tuple[float, float]:
        return float(self.endpoints_lo[r]), float(self.endpoints_hi[r])

    def to_json(self) -> dict:
        geo = check_tower_geometry(self)
        return {"T": self.T, "k": self.k, "l": self.l,
                "endpoints_lo": self.endpoints_lo.tolist(),
                "endpoints_hi": self.endpoints_hi.tolist(),
                "gaps": geo["gaps"], "normalized_gaps": geo["normalized_gaps"]}


def smallness_bound(T: float) -> float:
    return TOWER_SMALLNESS * T / math.log(T)


def build_tower(T: float, k: int, l: float, ladder: JacobsLadder) -> IterationTower:
    """Segments [T^(r), (T+2l)^(r)] = phi_1^{-r}([T, T+2l]) for r = 0..k."""
    if T < 100:
        raise ValueError(f"tower precondition: T={T} must be >= 100")
    if k < 0 or l <= 0:
        raise ValueError("tower precondition: k >= 0 and l > 0")
    if not 2 * l < smallness_bound(T):
        raise ValueError(
            f"tower precondition: 2l={2 * l} must be < 0.01 T/ln T = {smallness_bound(T):.6g}")
    lo = [float(T)]
    hi = [float(T + 2 * l)]
    for _ in range(k):
        nxt = ladder.phi1_inverse(np.array([lo[-1], hi[-1]]))
        lo.append(float(nxt[0]))
        hi.append(float(nxt[1]))
    tower = IterationTower(T=float(T), k=k, l=float(l),
                           endpoints_lo=np.array(lo), endpoints_hi=np.array(hi))
    if not check_tower_geometry(tower)["ordered"]:
        raise ArithmeticError("tower ordering violated: the ladder table is corrupt")
    return tower


def check_tower_geometry(tower: IterationTower, c: float = EULER_GAMMA) -> dict:
    T = tower.T
    lengths = tower.lengths
    gaps = tower.gaps
    scale = (1 - c) * T / math.log(T)
    ordered = bool(np.all(lengths > 0) and np.all(gaps > 0))
    return {
        "lengths": lengths.tolist(),
        "gaps": gaps.tolist(),
        "ordered": ordered,
        "normalized_gaps": (gaps / scale).tolist(),
        "smallness_bound": smallness_bound(T),
        "lengths_small": bool(np.all(lengths < smallness_bound(T))),
    }


# ---------------------------------------------------------------------------
# c0 calibration
# ---------------------------------------------------------------------------

def laplace_transform_z2(table: HLTable, deltas, cut: float = 40.0):
    """int_0^inf exp(-2 delta t) Z(t)^2 dt from the table's cells.

    Requires exp(-2 delta t_max) < exp(-cut) so the truncation is negligible.
    """
    deltas = np.atleast_1d(np.asarray(deltas, dtype=float))
    if np.any(2 * deltas * table.t_max < cut):
        raise ValueError("table too short for the requested Laplace parameters")
    xg, wg = np.polynomial.legendre.leggauss(GL_ORDER)
    n_cells = table.values.size - 1
    out = np.zeros(deltas.size)
    for start in range(0, n_cells, 8192):
        x0 = np.arange(start, min(start + 8192, n_cells)) * table.step
        x = x0[:, None] + 0.5 * table.step * (xg + 1.0)
        z2 = hardy_z(x.ravel(), table.config) ** 2
        wz = (z2.reshape(x.shape) * (0.5 * table.step * wg)).ravel()
        out += np.exp(-2.0 * np.outer(deltas, x.ravel())) @ wz
    return out


def calibrate_c0(ladder: JacobsLadder, T_range, mode: str = "laplace", candidate=None,
                 G=None, n: int = 24) -> float:
    """Estimate the additive constant c0 of the defining relation.

    ``mode="laplace"``: c0 is the constant term of
    int_0^inf e^{-2 delta t}|zeta|^2 dt - (c - ln 4 pi delta)/(2 sin delta),
    fitted as the intercept of a least-squares line in delta over
    delta = 20/T, T in ``T_range`` (so y = 1/(2 delta) sweeps the range).

    ``mode="candidate"``: given a ladder candidate ``candidate(T)``, c0 is the
    least-squares intercept of G(T) - [y ln y + (c - ln 2 pi) y]; ``G``
    overrides the Hardy-Littlewood integral (for synthetic data).

    Warns when the residuals do not shrink towards the top of the range.
    """
    T_lo, T_hi = map(float, T_range)
    Ts = np.linspace(T_lo, T_hi, n)
    const = ladder.constants
    if mode == "candidate":
        if candidate is None:
            raise ValueError("candidate mode needs a candidate ladder function")
        y = np.asarray(candidate(Ts), dtype=float)
        g = np.asarray(G(Ts) if G is not None else ladder.G(Ts), dtype=float)
        diffs = g - (y * np.log(y) + (const.c - LOG_2PI) * y)
        c0 = float(np.mean(diffs))
        resid = diffs - c0
    elif mode == "laplace":
        deltas = 20.0 / Ts
        ladder.ensure_coverage(40.0 / (2 * deltas.min()) + 1.0)
        L = laplace_transform_z2(ladder.table, deltas)
        main = (const.c - np.log(4 * math.pi * deltas)) / (2 * np.sin(deltas))
        vals = L - main
        A = np.column_stack([np.ones_like(deltas), deltas])
        coef, *_ = np.linalg.lstsq(A, vals, rcond=None)
        c0 = float(coef[0])
        resid = vals - A @ coef
    else:
        raise ValueError(f"unknown calibration mode {mode!r}")
    half = resid.size // 2
    if half and np.mean(np.abs(resid[half:])) > np.mean(np.abs(resid[:half])) * 1.5 + 1e-12:
        warnings.warn("ill-conditioned c0 fit: residuals do not decrease in T", RuntimeWarning)
    return c0
