"""Adaptive quadrature, Gram reports and the identity checks.

Every report is a plain dict in the v1 schema
``{schema, kind, inputs, values, residuals, quad_error, pass}`` so it can be
dumped to JSON unchanged.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .generator import (GeneratedSystem, kink_hints, normalization_factors, pin_defect,
                        step_maps, u_map)
from .ladder import JacobsLadder, build_tower, smallness_bound
from .zeta_core import hardy_z

SCHEMA = "v1"


class QuadratureError(ArithmeticError):
    """Tolerance not met within max_depth; carries the best estimate."""

    def __init__(self, msg, value, error):
        super().__init__(msg)
        self.value = value
        self.error = error


@dataclass(frozen=True)
class QuadratureSpec:
    order: int = 16
    abs_tol: float = 1e-9
    max_depth: int = 30
    kink_hints: list = field(default_factory=list)
    initial_panels: int = 4
    rel_tol: float = 1e-9  # noise floor of the composed ladder maps
    max_panels: int = 50_000

    def __post_init__(self):
        if not self.abs_tol > 0:
            raise ValueError("abs_tol must be > 0")
        if not self.rel_tol >= 0:
            raise ValueError("rel_tol must be >= 0")
        if self.order < 4:
            raise ValueError("order must be >= 4")


def _gl(order):
    return np.polynomial.legendre.leggauss(order)


def integrate(f, a: float, b: float, spec: QuadratureSpec = QuadratureSpec()):
    """Adaptive composite Gauss-Legendre on [a, b].

    ``f`` takes a 1-D array of points and returns values of shape (n,) or
    (n, m); all components share the panel refinement. Each panel compares
    its one-panel and two-half-panel estimates; the half-panel sum is kept
    and the difference is its error estimate. A panel is accepted when the
    estimate is within its length share of ``abs_tol`` or within
    ``rel_tol`` (at least rounding level) of the panel's integral of |f|. Returns
    ``(value, error_estimate)``; raises :class:`QuadratureError` when
    ``max_depth`` or ``max_panels`` is exhausted.
    """
    if b < a:
        v, e = integrate(f, b, a, spec)
        return -v, e
    if b == a:
        probe = np.asarray(f(np.array([a])))
        return np.zeros(probe.shape[1:]) if probe.ndim > 1 else 0.0, 0.0
    x, w = _gl(spec.order)
    hints = sorted(h for h in spec.kink_hints if a < h < b)
    edges = np.concatenate([[a], hints, [b]])
    lo = np.concatenate([np.linspace(edges[i], edges[i + 1], spec.initial_panels + 1)[:-1]
                         for i in range(edges.size - 1)])
    hi = np.concatenate([lo[1:], [b]])
    total_len = b - a
    value = None
    err_total = 0.0

    def rule(pa, pb):
        # (integral, integral of |f|) per panel
        half = 0.5 * (pb - pa)
        pts = pa[:, None] + half[:, None] * (x + 1.0)
        vals = np.asarray(f(pts.ravel()))
        vals = np.moveaxis(vals.reshape(pts.shape + vals.shape[1:]), 1, 0)
        shape = (-1,) + (1,) * (vals.ndim - 2)
        return (np.tensordot(w, vals, axes=1) * half.reshape(shape),
                np.tensordot(w, np.abs(vals), axes=1) * half.reshape(shape))

    for _ in range(spec.max_depth + 1):
        mid = 0.5 * (lo + hi)
        whole, _ = rule(lo, hi)
        left, left_abs = rule(lo, mid)
        right, right_abs = rule(mid, hi)
        fine = left + right
        diff = np.abs(whole - fine)
        scale = left_abs + right_abs
        if diff.ndim > 1:
            diff = diff.reshape(diff.shape[0], -1).max(axis=1)
            scale = scale.reshape(scale.shape[0], -1).max(axis=1)
        if value is None:
            value = np.zeros(fine.shape[1:])
        # rounding noise of f sets a floor relative to int |f|
        floor = max(100 * np.finfo(float).eps, spec.rel_tol) * scale
        ok = (diff <= spec.abs_tol * (hi - lo) / total_len) | (diff <= floor)
        value = value + fine[ok].sum(axis=0)
        err_total += float(diff[ok].sum())
        if ok.all():
            return _scalar(value), err_total
        lo, hi, mid = lo[~ok], hi[~ok], mid[~ok]
        if 2 * lo.size > spec.max_panels:
            break
        lo, hi = np.concatenate([lo, mid]), np.concatenate([mid, hi])
    # depth or panel budget exhausted: report the best we have
    whole, _ = rule(lo, hi)
    best = _scalar(value + whole.sum(axis=0))
    err_total += float(np.abs(whole).sum())
    raise QuadratureError(f"tolerance {spec.abs_tol} not met after depth {spec.max_depth}",
                          best, err_total)


def _scalar(v):
    v = np.asarray(v)
    return float(v) if v.ndim == 0 else v


def report(kind, inputs, values, residuals, quad_error, passed) -> dict:
    return {"schema": SCHEMA, "kind": kind, "inputs": inputs,
            "values": [_jsonable(v) for v in values],
            "residuals": [_jsonable(r) for r in residuals],
            "quad_error": float(quad_error), "pass": bool(passed)}


def _jsonable(v):
    v = np.asarray(v)
    return float(v) if v.ndim == 0 else v.tolist()


# ---------------------------------------------------------------------------
# Gram matrices
# ---------------------------------------------------------------------------

@dataclass
class GramReport:
    size: int
    matrix: np.ndarray
    max_offdiag_abs: float
    diag: np.ndarray
    est_quad_error: float
    flagged: bool = False

    def as_report(self, inputs: dict, rel_tol: float = 1e-6) -> dict:
        bound = rel_tol * float(np.abs(self.diag).max())
        return report("gram", inputs, self.matrix.tolist(), [self.max_offdiag_abs],
                      self.est_quad_error,
                      (not self.flagged) and self.max_offdiag_abs < bound)


def gram_from_fn(members, a, b, N, spec) -> GramReport:
    iu = np.triu_indices(N + 1)

    def products(t):
        v = members(t)
        return v[:, iu[0]] * v[:, iu[1]]

    flagged = False
    try:
        upper, err = integrate(products, a, b, spec)
    except QuadratureError as exc:
        upper, err, flagged = exc.value, exc.error, True
    G = np.zeros((N + 1, N + 1))
    G[iu] = upper
    G[(iu[1], iu[0])] = upper
    off = np.abs(G - np.diag(np.diag(G)))
    return GramReport(size=N + 1, matrix=G, max_offdiag_abs=float(off.max()),
                      diag=np.diag(G).copy(), est_quad_error=err, flagged=flagged)


# Affine maps quantise tau to its ulp; through the steep ladder chain this
# leaves up to ~1e-7 relative jitter in deep members, hence the Gram floor.
GRAM_SPEC = QuadratureSpec(abs_tol=1e-9, rel_tol=1e-7, max_panels=20_000)


def gram_matrix(sys, N: int, spec: QuadratureSpec = GRAM_SPEC, normalize: bool = False,
                use_kinks: bool = True) -> GramReport:
    """All inner products <f_m, f_n>, 0 <= m, n <= N, of a system on [a, a+2l].

    ``sys`` is a :class:`GeneratedSystem` or a base system. With
    ``normalize`` the members are scaled by their normalization factors.
    """
    if N < 1:
        raise ValueError("N must be >= 1")
    if isinstance(sys, GeneratedSystem):
        fn = sys.members_fn(N)
        a, b = sys.a, sys.a + 2 * sys.l
        if use_kinks and sys.path:
            spec = replace(spec, kink_hints=sorted(set(spec.kink_hints) | set(kink_hints(sys))))
        if normalize:
            fac = normalization_factors(sys, N)
            members = lambda t: fn(t) * fac  # noqa: E731
        else:
            members = fn
    else:
        a, b = sys.interval
        if normalize:
            fac = np.array([1 / math.sqrt(sys.norm_sq(n)) for n in range(N + 1)])
            members = lambda t: sys.eval_all(N, t) * fac  # noqa: E731
        else:
            members = lambda t: sys.eval_all(N, t)  # noqa: E731
    return gram_from_fn(members, a, b, N, spec)


# ---------------------------------------------------------------------------
# substitution identity: change of variables along the ladder
# ---------------------------------------------------------------------------

def ladder_pullback(g, p: int, ladder: JacobsLadder):
    """tau -> g(phi_1^p(tau)) * prod_{r<p} Z~^2(phi_1^r(tau))."""
    fprime = ladder.constants.F_prime

    def integrand(tau):
        x = np.asarray(tau, dtype=float)
        jac = np.ones_like(x)
        for _ in range(p):
            nxt = np.asarray(ladder.phi1(x))
            z = hardy_z(x, ladder.config)
            jac *= z * z / fprime(nxt)
            x = nxt
        return np.asarray(g(x)) * jac
    return integrand


def check_lemma1(g, T: float, U: float, p: int, ladder: JacobsLadder,
                 spec: QuadratureSpec = QuadratureSpec(abs_tol=1e-9, rel_tol=1e-9),
                 tol: float = 1e-7, name: str = "g") -> dict:
    """Both sides of int_T^{T+U} g = int_{T^(p)}^{(T+U)^(p)} g(phi^p) prod Z~^2(phi^r).

    Passes when |LHS - RHS| < ``tol``. The preimage endpoints are doubles,
    so their images miss T and T+U by a few ulps times the chain's
    derivative; ``residuals[1]`` is the residual after moving the LHS onto
    those images (a diagnostic, not the pass test).
    """
    if not U < smallness_bound(T):
        raise ValueError(f"U={U} violates U < 0.01 T/ln T = {smallness_bound(T):.6g}")
    lhs, e1 = integrate(g, T, T + U, spec)
    lo = ladder.phi1_inverse_iter(T, p)
    hi = ladder.phi1_inverse_iter(T + U, p)
    rhs, e2 = integrate(ladder_pullback(g, p, ladder), lo, hi, spec)
    y_lo = float(ladder.phi1_iter(lo, p))
    y_hi = float(ladder.phi1_iter(hi, p))
    shifted = lhs - _sliver(g, T, y_lo) + _sliver(g, T + U, y_hi)
    resid = abs(lhs - rhs)
    qerr = e1 + e2
    return report("lemma1", {"g": name, "T": T, "U": U, "p": p, "segment": [lo, hi],
                             "image": [y_lo, y_hi]},
                  [lhs, rhs], [resid, abs(shifted - rhs)], qerr, resid < tol)


def _sliver(g, a, b):
    # int_a^b g for |b - a| of a few ulps: trapezoid is exact enough
    return 0.5 * float(np.sum(np.asarray(g(np.array([a, b]))))) * (b - a)


# ---------------------------------------------------------------------------
# the transform chain of one step
# ---------------------------------------------------------------------------

def check_theorem_equality_chain(f_m, f_n, T: float, p: int, a: float, l: float,
                                 ladder: JacobsLadder, spec: QuadratureSpec = GRAM_SPEC,
                                 tower=None, atol: float = 1e-7) -> dict:
    """The four integrals of one transform step for the pair (f_m, f_n).

    values = [original on [a, a+2l], shifted to [T, T+2l], pulled back to
    the p-th segment, rescaled (len_p/2l) * <f_m^p, f_n^p>], plus the raw
    <f_m^p, f_n^p> as a fifth entry. residuals are the successive
    differences of the first four.
    """
    if tower is None:
        tower = build_tower(T, p, l, ladder)
    lo, hi = tower.segment(p)
    length = hi - lo

    def pair(x):
        return np.asarray(f_m(x)) * np.asarray(f_n(x))

    v0, e0 = integrate(pair, a, a + 2 * l, spec)
    v1, e1 = integrate(lambda tau: pair(tau - T + a), T, T + 2 * l, spec)
    v2, e2 = integrate(ladder_pullback(lambda x: pair(x - T + a), p, ladder), lo, hi, spec)

    def stepped(t):
        u, w = step_maps(t, p, tower, a, l, ladder)
        return pair(u) * w * w

    raw, e3 = integrate(stepped, a, a + 2 * l, spec)
    v3 = length / (2 * l) * raw
    values = [v0, v1, v2, v3, raw]
    resid = [abs(v1 - v0), abs(v2 - v1), abs(v3 - v2)]
    qerr = e0 + e1 + e2 + e3 * length / (2 * l)
    return report("chain", {"T": T, "p": p, "a": a, "l": l, "len_p": length},
                  values, resid, qerr, max(resid) <= max(5 * qerr, atol))


# ---------------------------------------------------------------------------
# the composed u-maps as automorphisms of [a, a+2l]
# ---------------------------------------------------------------------------

def composed_u(sys: GeneratedSystem):
    """t -> u_{p_1}(u_{p_2}(... u_{p_s}(t))), the argument map of the path."""
    def mapped(t):
        x = np.atleast_1d(np.asarray(t, dtype=float))
        for p in reversed(sys.path):
            x = np.asarray(u_map(x, p, sys.tower, sys.a, sys.l, sys.ladder))
            # rounding may push the image a hair outside; the next map needs it inside
            x = np.clip(x, sys.a, sys.a + 2 * sys.l)
        return x
    return mapped


def check_automorphism(sys: GeneratedSystem, rng: np.random.Generator, n_pairs: int = 100,
                       tol: float = 1e-8) -> dict:
    """Composed u-maps fix a and a+2l (within ``tol``) and preserve order."""
    a, b = sys.a, sys.a + 2 * sys.l
    ends = np.array([a, b])
    # endpoints go through unclipped maps
    x = ends.copy()
    for p in reversed(sys.path):
        x = np.asarray(u_map(np.clip(x, a, b), p, sys.tower, a, sys.l, sys.ladder))
    end_err = np.abs(x - ends)
    # the pinning must be a rounding-level correction, not a repair
    defect = max(pin_defect(p, sys.tower, sys.l, sys.ladder) for p in set(sys.path))
    pairs = np.sort(rng.uniform(a, b, size=(n_pairs, 2)), axis=1)
    U = composed_u(sys)
    images = U(pairs.ravel()).reshape(n_pairs, 2)
    monotone = bool(np.all(images[:, 1] > images[:, 0]))
    return report("automorphism", {"path": list(sys.path), "T": sys.T, "k": sys.k,
                                   "a": a, "l": sys.l, "n_pairs": n_pairs},
                  x.tolist(), end_err.tolist() + [defect], 0.0,
                  bool(np.all(end_err <= tol)) and defect <= tol and monotone)
