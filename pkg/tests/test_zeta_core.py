import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from jacobs_ladder.zeta_core import (
    EULER_GAMMA,
    LOG_2PI,
    ZetaEngineConfig,
    find_zeros,
    hardy_z,
    hardy_z_oracle,
    riemann_siegel_theta,
    theta_asymptotic,
    theta_oracle,
    zeta_abs_sq,
    zeta_oracle,
)

# first three ordinates of nontrivial zeros (classical tables)
KNOWN_ZEROS = [14.134725141734693, 21.022039638771555, 25.010857580145688]


def test_named_constants():
    assert EULER_GAMMA == pytest.approx(float(mpmath.euler), abs=1e-16)
    assert LOG_2PI == pytest.approx(math.log(2 * math.pi), abs=1e-15)


def test_config_validation():
    with pytest.raises(ValueError):
        ZetaEngineConfig(rs_correction_order=5)
    with pytest.raises(ValueError):
        ZetaEngineConfig(min_t=5.0)


class TestTheta:
    def test_first_zero_of_theta(self):
        # bisection on the gamma-based form near t = 17.8456
        lo, hi = 17.0, 18.5
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            if theta_oracle(mid) < 0:
                lo = mid
            else:
                hi = mid
        assert abs(lo - 17.8456) < 1e-3
        assert abs(theta_oracle(lo)) < 1e-8

    def test_asymptotic_vs_oracle_at_1000(self):
        assert abs(theta_asymptotic(1000.0) - theta_oracle(1000.0)) < 1e-10

    def test_oracle_matches_mpmath(self):
        for t in (20.0, 150.0, 3000.0):
            ref = float(mpmath.siegeltheta(t))
            assert theta_oracle(t) == pytest.approx(ref, abs=1e-9)

    @given(st.floats(min_value=100.0, max_value=1e5))
    @settings(max_examples=50, deadline=None)
    def test_paths_agree_above_100(self, t):
        assert abs(riemann_siegel_theta(t) - theta_oracle(t)) < 1e-9

    def test_monotone_above_18(self):
        t = np.linspace(18.0, 500.0, 2001)
        assert np.all(np.diff(riemann_siegel_theta(t)) > 0)

    def test_domain_error(self):
        with pytest.raises(ValueError):
            riemann_siegel_theta(0.0)


class TestZetaOracle:
    def test_zeta_two(self):
        assert abs(zeta_oracle(2.0) - math.pi ** 2 / 6) < 1e-12

    def test_zeta_zero(self):
        assert abs(zeta_oracle(0.0) - (-0.5)) < 1e-12

    def test_third_zero(self):
        assert abs(zeta_oracle(0.5 + 25.0109j)) < 1e-4

    def test_pole(self):
        with pytest.raises((ValueError, ZeroDivisionError)):
            zeta_oracle(1.0)

    @pytest.mark.parametrize("s", [0.5 + 100j, 0.5 + 1234.5j, 0.3 + 40j, 2.5 - 7j])
    def test_against_mpmath(self, s):
        ref = complex(mpmath.zeta(s))
        assert abs(zeta_oracle(s) - ref) <= 1e-10 * max(1.0, abs(ref))


class TestHardyZ:
    def test_first_zero_small(self):
        cfg = ZetaEngineConfig(min_t=10.0)
        assert abs(hardy_z(14.134725, cfg)) < 1e-4

    def test_real_by_construction(self):
        # e^{i theta} zeta(1/2 + it) has no imaginary part
        for t in (30.0, 250.0, 1500.0):
            val = np.exp(1j * theta_oracle(t)) * zeta_oracle(0.5 + 1j * t)
            assert abs(val.imag) < 1e-8

    @given(st.floats(min_value=200.0, max_value=1e4))
    @settings(max_examples=60, deadline=None)
    def test_fast_vs_oracle(self, t):
        fast, slow = abs(hardy_z(t)), abs(hardy_z_oracle(t))
        assert abs(fast - slow) <= 1e-6 * max(slow, 1e-3)

    def test_vs_mpmath(self):
        for t in (500.0, 2500.0, 9999.5):
            assert hardy_z(t) == pytest.approx(float(mpmath.siegelz(t)), rel=1e-7, abs=1e-8)

    def test_abs_sq(self):
        t = np.array([300.0, 700.0])
        assert np.allclose(zeta_abs_sq(t), hardy_z(t) ** 2)

    def test_vectorised_shape(self):
        t = np.linspace(300, 400, 12).reshape(3, 4)
        assert hardy_z(t).shape == (3, 4)


def test_find_zeros_matches_table():
    zs = find_zeros(10.0, 26.0, func=hardy_z_oracle)[:3]
    assert np.allclose(zs, KNOWN_ZEROS, atol=1e-8)


def test_find_zeros_rs_path():
    cfg = ZetaEngineConfig(min_t=10.0)
    zs = find_zeros(10.0, 26.0, config=cfg)[:3]
    assert np.allclose(zs, KNOWN_ZEROS, atol=1e-4)
