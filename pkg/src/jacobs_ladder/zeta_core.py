"""Hardy's Z function, the Riemann-Siegel theta function and an independent
Euler-Maclaurin zeta oracle on the critical line.

The fast path is the Riemann-Siegel formula with up to four correction
terms; everything below ``min_t`` (and every cross-check) goes through the
Euler-Maclaurin oracle, which shares no code with the fast path.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import mpmath
import numpy as np
from scipy.special import loggamma

# 20 significant digits; both enter the ladder's defining relation.
EULER_GAMMA = 0.57721566490153286061
LOG_2PI = 1.8378770664093454836
LOG_PI = 1.1447298858494001741

_CHUNK = 65536


@dataclass(frozen=True)
class ZetaEngineConfig:
    """Numerical knobs of the zeta engine.

    rs_correction_order: number of Riemann-Siegel correction terms (0..4).
    oracle_terms: minimum length of the Euler-Maclaurin direct sum.
    min_t: below this height ``hardy_z`` defers to the oracle.
    """

    rs_correction_order: int = 4
    oracle_terms: int = 40
    min_t: float = 200.0

    def __post_init__(self):
        if self.rs_correction_order not in (0, 1, 2, 3, 4):
            raise ValueError(
                f"rs_correction_order must be in 0..4, got {self.rs_correction_order}")
        if not self.min_t >= 10:
            raise ValueError(f"min_t must be >= 10, got {self.min_t}")
        if self.oracle_terms < 1:
            raise ValueError(f"oracle_terms must be positive, got {self.oracle_terms}")


DEFAULT_CONFIG = ZetaEngineConfig()


def _check_positive(t):
    t = np.asarray(t, dtype=float)
    if np.any(~(t > 0)):
        raise ValueError("domain error: t must be > 0")
    return t


# ---------------------------------------------------------------------------
# theta
# ---------------------------------------------------------------------------

def theta_oracle(t):
    """theta(t) = -(t/2) ln pi + Im ln Gamma(1/4 + i t/2), any t > 0."""
    t = _check_positive(t)
    return -0.5 * t * LOG_PI + loggamma(0.25 + 0.5j * t).imag


def theta_asymptotic(t):
    t = _check_positive(t)
    r = 1.0 / t
    r2 = r * r
    tail = r * (1.0 / 48 + r2 * (7.0 / 5760 + r2 * (31.0 / 80640 + r2 * (127.0 / 430080))))
    return 0.5 * t * (np.log(t) - LOG_2PI) - 0.5 * t - math.pi / 8 + tail


def riemann_siegel_theta(t, config: ZetaEngineConfig = DEFAULT_CONFIG):
    """Riemann-Siegel theta function.

    Uses the asymptotic expansion for ``t >= config.min_t`` and the
    log-gamma form below it. Accepts scalars or arrays.
    """
    t = _check_positive(t)
    scalar = t.ndim == 0
    t = np.atleast_1d(t)
    out = np.empty_like(t)
    hi = t >= config.min_t
    if hi.any():
        out[hi] = theta_asymptotic(t[hi])
    if (~hi).any():
        out[~hi] = theta_oracle(t[~hi])
    return out[0] if scalar else out


# ---------------------------------------------------------------------------
# Riemann-Siegel remainder coefficients
# ---------------------------------------------------------------------------

@lru_cache(maxsize=None)
def _psi_taylor(degree: int = 80) -> np.ndarray:
    """Taylor coefficients in q = p - 1/2 of
    Psi(p) = cos(2 pi (p^2 - p - 1/16)) / cos(2 pi p).

    Numerator and denominator are both power series in q^2; the quotient
    is formed by exact series division at 90 digits.
    """
    with mpmath.workdps(90):
        pi = mpmath.pi
        beta = -5 * pi / 8
        num = [mpmath.mpf(0)] * (degree + 1)
        den = [mpmath.mpf(0)] * (degree + 1)
        trig = (mpmath.cos(beta), -mpmath.sin(beta), -mpmath.cos(beta), mpmath.sin(beta))
        for j in range(degree // 2 + 1):
            num[2 * j] = (2 * pi) ** j / mpmath.factorial(j) * trig[j % 4]
            den[2 * j] = -((-1) ** j) * (2 * pi) ** (2 * j) / mpmath.factorial(2 * j)
        quot = [mpmath.mpf(0)] * (degree + 1)
        for k in range(degree + 1):
            acc = num[k] - mpmath.fsum(quot[i] * den[k - i] for i in range(k))
            quot[k] = acc / den[0]
        return np.array([float(c) for c in quot])


@lru_cache(maxsize=None)
def _psi_derivative_coeffs(order: int) -> np.ndarray:
    c = _psi_taylor()
    return np.polynomial.polynomial.polyder(c, order) if order else c


def _psi_deriv(q, order):
    return np.polynomial.polynomial.polyval(q, _psi_derivative_coeffs(order))


# (derivative order, coefficient) pairs for C_0 .. C_4 (Gabcke's form)
_PI2 = math.pi ** 2
_RS_TERMS = (
    ((0, 1.0),),
    ((3, -1.0 / (96 * _PI2)),),
    ((2, 1.0 / (64 * _PI2)), (6, 1.0 / (18432 * _PI2 ** 2))),
    ((1, -1.0 / (64 * _PI2)), (5, -1.0 / (3840 * _PI2 ** 2)),
     (9, -1.0 / (5308416 * _PI2 ** 3))),
    ((0, 1.0 / (128 * _PI2)), (4, 19.0 / (24576 * _PI2 ** 2)),
     (8, 11.0 / (5898240 * _PI2 ** 3)), (12, 1.0 / (2038431744 * _PI2 ** 4))),
)


def _rs_remainder(p, a, order):
    """Sum_k C_k(p) a^{-k} for k <= order."""
    q = p - 0.5
    total = np.zeros_like(p)
    inv_a = 1.0 / a
    scale = np.ones_like(p)
    for k in range(order + 1):
        ck = np.zeros_like(p)
        for deriv, coeff in _RS_TERMS[k]:
            ck += coeff * _psi_deriv(q, deriv)
        total += ck * scale
        scale = scale * inv_a
    return total


def _rs_main_sum(tt, N):
    n = np.arange(1, N + 1, dtype=float)
    phase = theta_asymptotic(tt)[:, None] - tt[:, None] * np.log(n)[None, :]
    return 2.0 * (np.cos(phase) / np.sqrt(n)[None, :]).sum(axis=1)


def _hardy_z_rs(t, order):
    # Points are grouped by their main-sum length so every value is a
    # function of its own t only, whatever batch it arrives in.
    a = np.sqrt(t / (2 * math.pi))
    N = np.floor(a).astype(int)
    p = a - N
    out = np.empty_like(t)
    for n_terms in np.unique(N):
        idx = np.nonzero(N == n_terms)[0]
        for lo in range(0, idx.size, _CHUNK):
            sel = idx[lo:lo + _CHUNK]
            out[sel] = _rs_main_sum(t[sel], int(n_terms))
    sign = np.where(N % 2 == 1, 1.0, -1.0)
    return out + sign * _rs_remainder(p, a, order) / np.sqrt(a)


# ---------------------------------------------------------------------------
# Euler-Maclaurin oracle
# ---------------------------------------------------------------------------

@lru_cache(maxsize=None)
def _bernoulli_ratios(m: int = 60) -> np.ndarray:
    """B_{2k} / (2k)! for k = 1..m."""
    return np.array([float(mpmath.bernoulli(2 * k) / mpmath.factorial(2 * k))
                     for k in range(1, m + 1)])


def _zeta_em_scalar(s: complex, min_terms: int) -> complex:
    if s == 1:
        raise ZeroDivisionError("pole error: zeta has a pole at s = 1")
    N = max(min_terms, int(abs(s) / math.pi) + 10)
    n = np.arange(1, N, dtype=float)
    head = np.exp(-s * np.log(n)).sum()
    lnN = math.log(N)
    Ns = complex(np.exp(-s * lnN))
    total = head + Ns * N / (s - 1) + 0.5 * Ns
    ratios = _bernoulli_ratios()
    poch = s  # s (s+1) ... (s + 2k - 2)
    NNpow = Ns / N  # N^{-s-2k+1}, k = 1
    prev = math.inf
    for k in range(1, ratios.size + 1):
        term = ratios[k - 1] * poch * NNpow
        total += term
        mag = abs(term)
        if mag < 1e-17 * max(abs(total), 1e-300):
            break
        if mag > prev:  # asymptotic series began diverging
            break
        prev = mag
        poch *= (s + 2 * k - 1) * (s + 2 * k)
        NNpow /= N * N
    return complex(total)


def zeta_oracle(s, config: ZetaEngineConfig = DEFAULT_CONFIG):
    """Riemann zeta by Euler-Maclaurin summation, double precision.

    Accurate to >= 10 significant digits for |Im s| <= 1e5. Accepts a
    scalar or an array of complex points.
    """
    arr = np.asarray(s, dtype=complex)
    if arr.ndim == 0:
        if arr == 1:
            raise ZeroDivisionError("pole error: zeta has a pole at s = 1")
        return _zeta_em_scalar(complex(arr), config.oracle_terms)
    flat = arr.ravel()
    out = np.array([_zeta_em_scalar(complex(v), config.oracle_terms) for v in flat])
    return out.reshape(arr.shape)


def hardy_z_oracle(t, config: ZetaEngineConfig = DEFAULT_CONFIG):
    """Z(t) = Re(exp(i theta(t)) zeta(1/2 + i t)) from the slow path only."""
    t = _check_positive(t)
    scalar = t.ndim == 0
    t = np.atleast_1d(t)
    z = zeta_oracle(0.5 + 1j * t, config)
    out = (np.exp(1j * theta_oracle(t)) * z).real
    return out[0] if scalar else out


def hardy_z(t, config: ZetaEngineConfig = DEFAULT_CONFIG):
    """Hardy's Z function, real on the real axis with |Z(t)| = |zeta(1/2+it)|.

    Riemann-Siegel (with ``config.rs_correction_order`` corrections) for
    t >= min_t, Euler-Maclaurin below. Vectorised over arrays.
    """
    t = _check_positive(t)
    scalar = t.ndim == 0
    t = np.atleast_1d(t)
    out = np.empty_like(t)
    hi = t >= config.min_t
    if hi.any():
        out[hi] = _hardy_z_rs(t[hi], config.rs_correction_order)
    if (~hi).any():
        out[~hi] = hardy_z_oracle(t[~hi], config)
    return out[0] if scalar else out


def zeta_abs_sq(t, config: ZetaEngineConfig = DEFAULT_CONFIG):
    """|zeta(1/2 + i t)|^2 on the critical line (= Z(t)^2)."""
    z = hardy_z(t, config)
    return z * z


def find_zeros(lo: float, hi: float, step: float = 0.05, func=None,
               config: ZetaEngineConfig = DEFAULT_CONFIG, xtol: float = 1e-13):
    """Sign changes of Z on [lo, hi]: scan with ``step`` then bisect.

    ``func`` defaults to :func:`hardy_z`; pass :func:`hardy_z_oracle` for the
    independent route.
    """
    if func is None:
        def func(x):
            return hardy_z(x, config)
    n = max(int(math.ceil((hi - lo) / step)), 1)
    grid = np.linspace(lo, hi, n + 1)
    vals = np.asarray(func(grid), dtype=float)
    zeros = []
    for i in np.nonzero(np.sign(vals[:-1]) * np.sign(vals[1:]) < 0)[0]:
        a, b = grid[i], grid[i + 1]
        fa = vals[i]
        while b - a > xtol * max(1.0, abs(a)):
            m = 0.5 * (a + b)
            fm = float(func(m))
            if fm == 0:
                a = b = m
                break
            if np.sign(fm) == np.sign(fa):
                a, fa = m, fm
            else:
                b = m
        zeros.append(0.5 * (a + b))
    exact = np.nonzero(vals == 0)[0]
    zeros.extend(grid[exact].tolist())
    return np.array(sorted(zeros))
