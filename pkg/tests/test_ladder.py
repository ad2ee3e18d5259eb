import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from jacobs_ladder.ladder import (
    DEFAULT_C0,
    DomainEscapeError,
    JacobsLadder,
    LadderConstants,
    build_tower,
    calibrate_c0,
    check_tower_geometry,
    invert_F,
    smallness_bound,
)
from jacobs_ladder.zeta_core import EULER_GAMMA, hardy_z

C = EULER_GAMMA


def five_point(f, t, h):
    return (-f(t + 2 * h) + 8 * f(t + h) - 8 * f(t - h) + f(t - 2 * h)) / (12 * h)


class TestConstants:
    def test_y_min_guard(self):
        with pytest.raises(ValueError):
            LadderConstants(y_min=1.0)

    @given(st.floats(min_value=10.0, max_value=1e6))
    @settings(max_examples=100, deadline=None)
    def test_invert_F_roundtrip(self, y):
        const = LadderConstants()
        back = invert_F(np.array([const.F(y)]), const)[0]
        assert back == pytest.approx(y, rel=1e-14)


class TestPhi1:
    def test_gap_scale_at_1e4(self, ladder):
        T = 1e4
        y = ladder.phi1(T)
        scale = (1 - C) * T / math.log(T)
        assert y < T
        assert 0.5 * scale <= T - y <= 1.5 * scale

    def test_defining_relation(self, ladder):
        T = np.linspace(1000.0, 10000.0, 37)
        lhs = ladder.constants.F(ladder.phi1(T))
        G = ladder.G(T)
        assert np.max(np.abs(lhs - G) / G) < 1e-11

    def test_monotone(self, ladder):
        T = np.linspace(500.0, 600.0, 2001)
        assert np.all(np.diff(ladder.phi1(T)) > 0)

    def test_below_identity(self, ladder):
        T = np.linspace(100.0, 11000.0, 300)
        assert np.all(ladder.phi1(T) < T)

    def test_scalar_in_scalar_out(self, ladder):
        assert isinstance(ladder.phi1(2000.0), float)


class TestZtilde:
    def test_vanishes_at_first_zero(self, ladder):
        assert abs(ladder.ztilde_sq(14.134725141734693)) < 1e-8

    def test_finite_difference_at_5000(self, ladder):
        t, h = 5000.0, 1e-3
        assert abs(hardy_z(t)) > 0.1
        fd = five_point(lambda x: ladder.phi1(x), t, h)
        assert fd == pytest.approx(ladder.ztilde_sq(t), rel=1e-5)

    def test_random_points(self, ladder):
        t = np.random.default_rng(11).uniform(1000.0, 10000.0, 100)
        t = t[np.abs(hardy_z(t)) > 0.1]
        fd = five_point(lambda x: np.asarray(ladder.phi1(x)), t, 1e-3)
        zt = ladder.ztilde_sq(t)
        assert np.max(np.abs(fd - zt) / zt) < 1e-5

    def test_omega_against_log(self, ladder):
        assert 0.9 <= ladder.omega(1e4) / math.log(1e4) <= 1.1

    def test_nonnegative(self, ladder):
        assert np.all(ladder.ztilde_sq(np.linspace(3000, 3010, 500)) >= 0)


class TestIterations:
    def test_p0_identity(self, ladder):
        assert ladder.phi1_iter(1234.5, 0) == 1234.5

    def test_p2_composition(self, ladder):
        assert ladder.phi1_iter(1e4, 2) == ladder.phi1(ladder.phi1(1e4))

    def test_strict_decrease(self, ladder):
        vals = [ladder.phi1_iter(1e4, p) for p in range(5)]
        assert all(b < a for a, b in zip(vals, vals[1:]))

    def test_domain_escape(self, ladder):
        with pytest.raises(DomainEscapeError):
            ladder.phi1_iter(30.0, 20)

    def test_chain_rule(self, ladder):
        t = np.random.default_rng(5).uniform(2000.0, 9000.0, 40)
        x1 = np.asarray(ladder.phi1(t))
        keep = (np.abs(hardy_z(t)) > 0.1) & (np.abs(hardy_z(x1)) > 0.1)
        t, x1 = t[keep], x1[keep]
        fd = five_point(lambda x: np.asarray(ladder.phi1_iter(x, 2)), t, 1e-3)
        jac = ladder.ztilde_sq(t) * ladder.ztilde_sq(x1)
        assert np.max(np.abs(fd - jac) / jac) < 1e-4


class TestInverse:
    def test_roundtrip(self, ladder):
        T = np.random.default_rng(3).uniform(1000.0, 10000.0, 100)
        back = ladder.phi1_inverse(ladder.phi1(T))
        assert np.max(np.abs(back - T) / T) < 1e-9

    def test_forward_of_inverse(self, ladder):
        y = np.array([900.0, 4000.0, 9000.0])
        assert np.allclose(ladder.phi1(ladder.phi1_inverse(y)), y, rtol=1e-9, atol=0)

    def test_inverse_above(self, ladder):
        y = ladder.phi1(1e4)
        assert ladder.phi1_inverse(y) > y

    def test_no_extension(self, table):
        fixed = JacobsLadder(table, auto_extend=False)
        with pytest.raises(ValueError):
            fixed.phi1_inverse(table.t_max)


class TestTower:
    def test_k0(self, ladder):
        tw = build_tower(1e4, 0, 1.0, ladder)
        assert tw.segment(0) == (1e4, 1e4 + 2)

    def test_desk_scale(self, ladder):
        T = 1e4
        tw = build_tower(T, 3, 1.0, ladder)
        scale = (1 - C) * T / math.log(T)
        assert np.all((tw.gaps >= 0.5 * scale) & (tw.gaps <= 1.5 * scale))
        assert np.all(tw.lengths < smallness_bound(T))
        geo = check_tower_geometry(tw)
        assert geo["ordered"] and geo["lengths_small"]
        assert all(0.8 <= g <= 1.2 for g in geo["normalized_gaps"])

    def test_reverse_iteration(self, ladder):
        tw = build_tower(1e4, 3, 1.0, ladder)
        for r in range(1, 4):
            assert ladder.phi1(tw.endpoints_lo[r]) == pytest.approx(tw.endpoints_lo[r - 1],
                                                                    rel=1e-12)
            assert ladder.phi1(tw.endpoints_hi[r]) == pytest.approx(tw.endpoints_hi[r - 1],
                                                                    rel=1e-12)

    def test_lengths_shrink_with_l(self, ladder):
        a = build_tower(1e4, 2, 1.0, ladder).lengths
        b = build_tower(1e4, 2, 0.5, ladder).lengths
        assert np.all(b < a)

    @pytest.mark.parametrize("T,k,l", [(50.0, 1, 1.0), (1e4, -1, 1.0), (1e4, 1, 0.0),
                                       (1e4, 1, 6.0)])
    def test_preconditions(self, ladder, T, k, l):
        with pytest.raises(ValueError, match="precondition"):
            build_tower(T, k, l, ladder)

    def test_json_fields(self, ladder):
        js = build_tower(1e4, 2, 1.0, ladder).to_json()
        assert set(js) == {"T", "k", "l", "endpoints_lo", "endpoints_hi", "gaps",
                           "normalized_gaps"}

    def test_image_ends(self, ladder):
        tw = build_tower(1e4, 3, 1.0, ladder)
        for r in range(4):
            A, B = tw.image_ends(r, ladder)
            assert abs(A - 1e4) < 1e-8 and abs(B - 1e4 - 2) < 1e-8


class TestCalibration:
    def test_synthetic_recovery(self, ladder):
        const = LadderConstants(c0=5.0)
        T = np.linspace(1000.0, 5000.0, 24)
        y = np.sqrt(T) * 40.0  # any increasing candidate
        fake_G = lambda x: const.F(np.sqrt(x) * 40.0)  # noqa: E731
        c0 = calibrate_c0(ladder, (T[0], T[-1]), mode="candidate",
                          candidate=lambda x: np.sqrt(x) * 40.0, G=fake_G)
        assert abs(c0 - 5.0) < 1e-6
        assert y.size == 24

    def test_range_stability(self, ladder):
        lo = calibrate_c0(ladder, (1e3, 5e3))
        hi = calibrate_c0(ladder, (5e3, 1e4))
        assert abs(lo - hi) < 0.5

    def test_near_pi(self, ladder):
        assert abs(calibrate_c0(ladder, (1e3, 1e4)) - DEFAULT_C0) < 1e-2

    def test_c0_shift_effect(self, table):
        T = 1e4
        base = JacobsLadder(table, LadderConstants(c0=DEFAULT_C0)).phi1(T)
        for dc in (-10.0, 10.0):
            moved = JacobsLadder(table, LadderConstants(c0=DEFAULT_C0 + dc)).phi1(T)
            assert abs(moved - base) <= 2 * abs(dc) / math.log(T)

    def test_unknown_mode(self, ladder):
        with pytest.raises(ValueError):
            calibrate_c0(ladder, (1e3, 2e3), mode="nope")
