"""Cached cumulative Hardy-Littlewood integral G(T) = int_0^T |zeta(1/2+it)|^2 dt.

The table stores G at the nodes ``j * step``. Between nodes, :func:`hl_integral`
re-uses the adaptive leaf panels of the cell (rebuilt lazily and kept in
memory) and adds a fixed Gauss-Legendre integral over the partial leaf, so G
is continuous and G'(T) = Z(T)^2 to rounding. A monotone cubic Hermite
interpolant (node derivatives are the exact integrand values) is kept for
cheap predictions and for inversion starting points.
"""
from __future__ import annotations

import logging
import math
import os
from dataclasses import dataclass, field

import numpy as np

from .zeta_core import DEFAULT_CONFIG, EULER_GAMMA, LOG_2PI, ZetaEngineConfig, hardy_z

log = logging.getLogger(__name__)

GL_ORDER = 16
_GL_X, _GL_W = np.polynomial.legendre.leggauss(GL_ORDER)
_SCAN_STEP = 0.05
_BISECT_ITERS = 48
_BATCH_CELLS = 4096

HEADER_PREFIX = "# hl_table v1 step="


class CacheError(IOError):
    """Unreadable or inconsistent ``hl_table.csv``."""


def _z2(t, config):
    z = hardy_z(t, config)
    return z * z


def gl_fixed(lo, hi, config: ZetaEngineConfig = DEFAULT_CONFIG):
    """Fixed 16-point Gauss-Legendre integral of Z^2 over [lo, hi] (arrays)."""
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    half = 0.5 * (hi - lo)
    x = lo[..., None] + half[..., None] * (_GL_X + 1.0)
    vals = _z2(x.ravel(), config).reshape(x.shape)
    return half * (vals @ _GL_W)


def _panel_integrals(lo, hi, config, tol_per_length, max_depth=30, leaves=False):
    """Adaptive GL16 on a list of panels; returns per-panel values.

    Each panel is accepted when the 1-panel and 2-panel estimates agree to
    ``tol_per_length`` times its length; otherwise both halves are refined.
    With ``leaves`` also returns ``(owner, leaf_lo, leaf_val)`` for the
    half panels whose GL16 values make up the accepted sums.
    """
    result = np.zeros(lo.size)
    owner = np.arange(lo.size)
    a, b = lo.copy(), hi.copy()
    l_own, l_lo, l_val = [], [], []
    for _ in range(max_depth):
        if a.size == 0:
            break
        mid = 0.5 * (a + b)
        whole = gl_fixed(a, b, config)
        left = gl_fixed(a, mid, config)
        right = gl_fixed(mid, b, config)
        fine = left + right
        floor = 64 * np.finfo(float).eps * np.abs(fine)
        ok = np.abs(whole - fine) <= np.maximum(tol_per_length * (b - a), floor)
        np.add.at(result, owner[ok], fine[ok])
        if leaves:
            l_own += [owner[ok], owner[ok]]
            l_lo += [a[ok], mid[ok]]
            l_val += [left[ok], right[ok]]
        bad = ~ok
        owner = np.concatenate([owner[bad], owner[bad]])
        a, b = np.concatenate([a[bad], mid[bad]]), np.concatenate([mid[bad], b[bad]])
    else:
        if a.size:
            raise ArithmeticError("HL cell quadrature did not converge")
    if leaves:
        return result, tuple(np.concatenate(v) if v else np.zeros(0) for v in (l_own, l_lo, l_val))
    return result


def _cell_integrals(x0, step, config, tol_per_length, leaves=False):
    """Integrals of Z^2 over the cells [x0, x0 + step].

    Cells are split at the sign changes of Z (scan at 0.05, then bisection),
    and the resulting panels are integrated adaptively.
    """
    nscan = max(int(math.ceil(step / _SCAN_STEP - 1e-12)), 1)
    frac = np.linspace(0.0, 1.0, nscan + 1)
    grid = x0[:, None] + step * frac[None, :]
    # Z is evaluated just right of t = 0, where it is far from a zero
    zg = hardy_z(np.maximum(grid.ravel(), 1e-12), config).reshape(grid.shape)
    cell_idx, seg_idx = np.nonzero(np.sign(zg[:, :-1]) * np.sign(zg[:, 1:]) < 0)
    za = grid[cell_idx, seg_idx]
    zb = grid[cell_idx, seg_idx + 1]
    fa = zg[cell_idx, seg_idx]
    for _ in range(_BISECT_ITERS):
        if za.size == 0:
            break
        m = 0.5 * (za + zb)
        fm = hardy_z(m, config)
        same = np.sign(fm) == np.sign(fa)
        za = np.where(same, m, za)
        fa = np.where(same, fm, fa)
        zb = np.where(same, zb, m)
    splits = 0.5 * (za + zb)

    # panel breakpoints per cell, deterministic order
    lo_list, hi_list, own_list = [], [], []
    order = np.lexsort((splits, cell_idx))
    cell_idx, splits = cell_idx[order], splits[order]
    bounds = np.searchsorted(cell_idx, np.arange(x0.size + 1))
    for c in range(x0.size):
        pts = splits[bounds[c]:bounds[c + 1]]
        edges = np.concatenate([[x0[c]], pts, [x0[c] + step]])
        lo_list.append(edges[:-1])
        hi_list.append(edges[1:])
        own_list.append(np.full(edges.size - 1, c))
    plo = np.concatenate(lo_list)
    phi = np.concatenate(hi_list)
    own = np.concatenate(own_list)
    if leaves:
        panels, (p_own, l_lo, l_val) = _panel_integrals(plo, phi, config, tol_per_length,
                                                        leaves=True)
    else:
        panels = _panel_integrals(plo, phi, config, tol_per_length)
    cells = np.zeros(x0.size)
    np.add.at(cells, own, panels)  # unbuffered, left to right within a cell
    if leaves:
        return cells, own[p_own.astype(int)], l_lo, l_val
    return cells


class _LeafIndex:
    """Lazily built leaf panels of the cell quadrature.

    Evaluating G inside a cell on the very panels that produced the node
    increments makes G continuous and G' = Z^2 on every leaf.
    """

    def __init__(self, table):
        self.table = table
        self.have = np.zeros(0, dtype=bool)
        self.lo = np.zeros(0)
        self.offset = np.zeros(0)   # G(leaf lo) - G(cell node)
        self.owner = np.zeros(0, dtype=int)
        self.total = {}

    def ensure(self, cells):
        tab = self.table
        n_cells = tab.values.size - 1
        if self.have.size < n_cells:
            self.have = np.concatenate([self.have, np.zeros(n_cells - self.have.size, bool)])
        need = np.unique(cells)
        need = need[~self.have[need]]
        if need.size == 0:
            return
        x0 = need * tab.step
        sums, own, llo, lval = _cell_integrals(x0, tab.step, tab.config, tab.abs_tol,
                                               leaves=True)
        order = np.lexsort((llo, own))
        own, llo, lval = own[order], llo[order], lval[order]
        bounds = np.searchsorted(own, np.arange(need.size + 1))
        offs = np.empty_like(lval)
        for c in range(need.size):
            sl = slice(bounds[c], bounds[c + 1])
            offs[sl] = np.concatenate([[0.0], np.cumsum(lval[sl])[:-1]])
            self.total[int(need[c])] = float(sums[c])
        lo = np.concatenate([self.lo, llo])
        order = np.argsort(lo, kind="stable")
        self.lo = lo[order]
        self.offset = np.concatenate([self.offset, offs])[order]
        self.owner = np.concatenate([self.owner, need[own]])[order]
        self.have[need] = True

    def evaluate(self, T, j):
        self.ensure(j)
        tab = self.table
        k = np.searchsorted(self.lo, T, side="right") - 1
        k = np.clip(k, 0, self.lo.size - 1)
        # a leaf of another cell can only win at a shared node; fall back to
        # the cell's own first leaf there
        wrong = self.owner[k] != j
        if np.any(wrong):
            k = np.where(wrong, np.searchsorted(self.lo, j * tab.step, side="left"), k)
        edge = self.lo[k]
        inside = T > edge
        part = np.zeros(np.shape(edge))
        if np.any(inside):
            part[inside] = gl_fixed(edge[inside], np.broadcast_to(T, edge.shape)[inside],
                                    tab.config)
        total = np.array([self.total[int(c)] for c in np.atleast_1d(j).ravel()]).reshape(np.shape(j))
        # rounding-level mismatch between the stored node increment and the
        # leaf sum (e.g. a cache built with another tolerance), spread linearly
        gap = tab.values[j + 1] - tab.values[j] - total
        lo = j * tab.step
        return tab.values[j] + (self.offset[k] + part + (T - lo) / tab.step * gap)


def _hermite_coeffs(values, derivs, step):
    """Monotone cubic Hermite coefficients per cell (Fritsch-Carlson limiter).

    Row j holds (c0, c1, c2, c3) with p(x) = c0 + c1 s + c2 s^2 + c3 s^3,
    s = x - node_j.
    """
    h = step
    delta = np.diff(values) / h
    d0 = derivs[:-1].copy()
    d1 = derivs[1:].copy()
    with np.errstate(divide="ignore", invalid="ignore"):
        alpha = d0 / delta
        beta = d1 / delta
        r = alpha * alpha + beta * beta
        scale = np.where(r > 9.0, 3.0 / np.sqrt(r), 1.0)
    d0 = np.where(delta > 0, d0 * scale, 0.0)
    d1 = np.where(delta > 0, d1 * scale, 0.0)
    c0 = values[:-1]
    c1 = d0
    c2 = (3 * delta - 2 * d0 - d1) / h
    c3 = (d0 + d1 - 2 * delta) / (h * h)
    return np.column_stack([c0, c1, c2, c3])


@dataclass
class HLTable:
    """Cumulative Hardy-Littlewood integral on the grid ``j * step``.

    Treat instances as immutable: :func:`extend_table` returns a new table
    whose prefix is bit-identical to this one.
    """

    step: float
    values: np.ndarray
    config: ZetaEngineConfig = DEFAULT_CONFIG
    cache_path: str | None = None
    abs_tol: float = 1e-9
    derivs: np.ndarray = field(default=None, repr=False)
    interp: np.ndarray = field(default=None, repr=False)

    t0 = 0.0

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.derivs is None:
            nodes = self.nodes
            d = np.empty(nodes.size)
            d[1:] = _z2(nodes[1:], self.config) if nodes.size > 1 else d[1:]
            d[0] = _z2(np.array([1e-12]), self.config)[0]
            self.derivs = d
        if self.interp is None:
            self.interp = _hermite_coeffs(self.values, self.derivs, self.step)
        self.leaves = _LeafIndex(self)

    @property
    def nodes(self) -> np.ndarray:
        return np.arange(self.values.size) * self.step

    @property
    def t_max(self) -> float:
        return (self.values.size - 1) * self.step

    def cell_of(self, T):
        j = np.floor(np.asarray(T, dtype=float) / self.step).astype(int)
        return np.clip(j, 0, self.values.size - 2)

    def predict(self, T):
        """Monotone cubic interpolant of G."""
        T = np.asarray(T, dtype=float)
        j = self.cell_of(T)
        s = T - j * self.step
        c = self.interp[j]
        return c[..., 0] + s * (c[..., 1] + s * (c[..., 2] + s * c[..., 3]))


def build_table(t_max: float, step: float = 0.25, config: ZetaEngineConfig = DEFAULT_CONFIG,
                cache_path: str | None = None, abs_tol: float = 1e-9) -> HLTable:
    """Load ``cache_path`` if it exists and extend it to cover ``t_max``."""
    if cache_path and os.path.exists(cache_path):
        table = load_table(cache_path, config)
        if table.step != step:
            raise CacheError(f"{cache_path}: step {table.step} does not match requested {step}")
        table.abs_tol = abs_tol
    else:
        table = HLTable(step=step, values=np.zeros(1), config=config,
                        cache_path=cache_path, abs_tol=abs_tol)
        if cache_path:
            _write_rows(cache_path, table.nodes, table.values, header=True, step=step)
    return extend_table(table, t_max)


def extend_table(table: HLTable, new_max: float) -> HLTable:
    """Append cells until the table covers ``new_max``.

    Existing values are untouched; cell integrals do not depend on how the
    extension is batched, so extending twice or once gives the same nodes.
    A failed cache write is logged and the in-memory table returned anyway.
    """
    n_have = table.values.size - 1
    n_need = int(math.ceil(new_max / table.step - 1e-12))
    if n_need <= n_have:
        return table
    new_cells = []
    for start in range(n_have, n_need, _BATCH_CELLS):
        stop = min(start + _BATCH_CELLS, n_need)
        x0 = np.arange(start, stop) * table.step
        new_cells.append(_cell_integrals(x0, table.step, table.config, table.abs_tol))
    cells = np.concatenate(new_cells)
    tail = np.cumsum(np.concatenate([[table.values[-1]], cells]))[1:]
    values = np.concatenate([table.values, tail])
    new_nodes = np.arange(n_have + 1, n_need + 1) * table.step
    derivs = np.concatenate([table.derivs, _z2(new_nodes, table.config)])
    out = HLTable(step=table.step, values=values, config=table.config,
                  cache_path=table.cache_path, abs_tol=table.abs_tol, derivs=derivs)
    if not np.all(np.diff(out.values) > 0):
        raise ArithmeticError("HL table lost strict monotonicity")
    if table.cache_path:
        try:
            _write_rows(table.cache_path, new_nodes, tail, header=False)
        except OSError as exc:
            log.warning("could not append to %s: %s", table.cache_path, exc)
    return out


def hl_integral(T, table: HLTable, method: str = "quadrature"):
    """G(T) = int_0^T |zeta(1/2+it)|^2 dt.

    ``method="quadrature"`` (default) adds the completed leaf panels of the
    cell and a Gauss-Legendre integral over the partial leaf to the cached
    node value; ``method="interp"`` uses
    the monotone cubic interpolant only.
    """
    Tarr = np.asarray(T, dtype=float)
    if np.any(Tarr < 0):
        raise ValueError("domain error: T must be >= 0")
    if np.any(Tarr > table.t_max + 1e-9):
        raise ValueError(f"T={Tarr.max()} beyond table coverage {table.t_max}; extend the table")
    if method == "interp":
        out = table.predict(Tarr)
    else:
        out = table.leaves.evaluate(Tarr, table.cell_of(Tarr))
    return float(out) if out.ndim == 0 else out


def invert_hl(target, table: HLTable, rtol: float = 1e-12, max_iter: int = 60):
    """Solve G(T) = target by bracketed Newton on the table (vectorised).

    The bracketing cell comes from the node values; the cubic interpolant
    supplies the starting point and bisection guards every Newton step.
    """
    target = np.atleast_1d(np.asarray(target, dtype=float))
    if np.any(target < 0) or np.any(target > table.values[-1]):
        raise ValueError("target outside the table's range; extend the table")
    j = np.clip(np.searchsorted(table.values, target, side="right") - 1, 0, table.values.size - 2)
    a = j * table.step
    b = a + table.step
    x = _invert_cubic(table, j, target)
    x = np.clip(x, a, b)
    done = np.zeros(target.size, dtype=bool)
    for _ in range(max_iter):
        f = hl_integral(x, table) - target
        a = np.where(f < 0, x, a)
        b = np.where(f > 0, x, b)
        d = hardy_z(x, table.config) ** 2
        with np.errstate(divide="ignore", invalid="ignore"):
            xn = x - f / d
        bad = ~np.isfinite(xn) | (xn < a) | (xn > b)
        xn = np.where(bad, 0.5 * (a + b), xn)
        xn = np.where(f == 0, x, xn)
        conv = (np.abs(xn - x) <= rtol * 1e-3 * np.abs(x)) | (b - a <= 4 * np.spacing(b))
        x = np.where(done, x, xn)
        done |= conv
        if done.all():
            break
    else:
        raise ArithmeticError("table inversion failed to converge")
    return x


def _invert_cubic(table, j, target):
    c = table.interp[j]
    s = np.full(j.size, 0.5 * table.step)
    for _ in range(8):
        p = c[:, 0] + s * (c[:, 1] + s * (c[:, 2] + s * c[:, 3]))
        dp = c[:, 1] + s * (2 * c[:, 2] + 3 * s * c[:, 3])
        with np.errstate(divide="ignore", invalid="ignore"):
            sn = s - (p - target) / dp
        s = np.where(np.isfinite(sn), np.clip(sn, 0.0, table.step), s)
    return j * table.step + s


# ---------------------------------------------------------------------------
# Ingham form
# ---------------------------------------------------------------------------

def ingham_main_term(T):
    T = np.asarray(T, dtype=float)
    return T * np.log(T) + (2 * EULER_GAMMA - 1 - LOG_2PI) * T


def check_ingham(T, table: HLTable) -> dict:
    """R(T) = G(T) - [T ln T + (2c - 1 - ln 2 pi) T] and R / (sqrt(T) ln T)."""
    T = np.asarray(T, dtype=float)
    G = np.asarray(hl_integral(T, table))
    main = ingham_main_term(T)
    R = G - main
    ratio = R / (np.sqrt(T) * np.log(T))
    return {"T": T.tolist(), "G": G.tolist(), "main": main.tolist(),
            "R": R.tolist(), "ratio": ratio.tolist(),
            "rel_to_main": (np.abs(R) / main).tolist()}


# ---------------------------------------------------------------------------
# cache file
# ---------------------------------------------------------------------------

def _fmt(x: float) -> str:
    return f"{x:.17g}"


def _write_rows(path, nodes, values, header: bool, step: float | None = None):
    mode = "w" if header else "a"
    with open(path, mode) as fh:
        if header:
            fh.write(f"{HEADER_PREFIX}{_fmt(step)}\n")
        fh.writelines(f"{_fmt(t)},{_fmt(v)}\n" for t, v in zip(nodes, values))


def load_table(path: str, config: ZetaEngineConfig = DEFAULT_CONFIG) -> HLTable:
    """Read ``hl_table.csv``; any malformation raises :class:`CacheError`."""
    try:
        with open(path) as fh:
            header = fh.readline().strip()
            rows = fh.read().split()
    except OSError as exc:
        raise CacheError(f"{path}: {exc}") from exc
    if not header.startswith(HEADER_PREFIX):
        raise CacheError(f"{path}: bad header {header!r}")
    try:
        step = float(header[len(HEADER_PREFIX):])
        data = np.array([[float(x) for x in row.split(",")] for row in rows])
    except ValueError as exc:
        raise CacheError(f"{path}: unparsable row ({exc})") from exc
    if data.ndim != 2 or data.shape[1] != 2 or data.shape[0] < 1:
        raise CacheError(f"{path}: expected rows 't,value'")
    t, v = data[:, 0], data[:, 1]
    if not np.allclose(t, np.arange(t.size) * step, rtol=0, atol=1e-9 * max(step, 1)):
        raise CacheError(f"{path}: nodes are not on the grid step={step}")
    if v[0] != 0 or not np.all(np.diff(v) > 0):
        raise CacheError(f"{path}: values must start at 0 and increase strictly")
    return HLTable(step=step, values=v, config=config, cache_path=path)
