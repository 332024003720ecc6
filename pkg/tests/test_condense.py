"""Condensation math: weight normalization, tightness at the expansion point,
conservativeness everywhere else, and log-linearity of the monomials."""

import math

import numpy as np
import pytest

from uavcast import condense
from uavcast.condense import (GpExpansionPoint, condensed_ratio_value,
                              distance_epigraph_weights, distance_ratio_parts,
                              exact_ratio_value, gamma_monomial,
                              interference_posynomial, min_rate_posynomial,
                              objective_term_weights,
                              speed_ratio_parts, speed_weights, dist_key, ipn_key,
                              x_key, y_key)
from uavcast.convex import Monomial, Posynomial


def random_expansion(rng, g_count=2, n_count=3):
    q = rng.uniform(10.0, 120.0, size=(n_count + 1, 2))
    dist = rng.uniform(700.0, 20000.0, size=(g_count, n_count))
    ipn = rng.uniform(1e-9, 1e-6, size=(g_count, n_count))
    p = rng.uniform(0.05, 1.0, size=(g_count, n_count))
    return GpExpansionPoint(q=q, dist_sq_bound=dist, ipn_bound=ipn, p_fixed=p)


class TestSpeedWeights:
    def test_symmetric_case_thirds(self):
        # all four coordinates equal to c and s_max^2 = 2 c^2 makes every
        # denominator term equal, so each share is exactly 1/3
        c = 37.0
        exp = GpExpansionPoint(q=np.full((2, 2), c),
                               dist_sq_bound=np.full((1, 1), 700.0),
                               ipn_bound=np.full((1, 1), 1e-9),
                               p_fixed=np.full((1, 1), 0.5))
        a, b, g = speed_weights(exp, s_max=math.sqrt(2.0) * c)
        assert a[0] == pytest.approx(1.0 / 3.0, abs=1e-12)
        assert b[0] == pytest.approx(1.0 / 3.0, abs=1e-12)
        assert g[0] == pytest.approx(1.0 / 3.0, abs=1e-12)

    def test_vanishing_budget_limit(self, rng):
        exp = random_expansion(rng)
        a, b, g = speed_weights(exp, s_max=1e-9)
        assert np.all(g < 1e-18)
        assert np.allclose(a + b, 1.0, atol=1e-12)

    def test_matches_direct_quotient(self, rng):
        exp = random_expansion(rng)
        s_max = 17.0
        a, b, g = speed_weights(exp, s_max)
        x, y = exp.q[:, 0], exp.q[:, 1]
        for n in range(1, exp.q.shape[0]):
            den = 2 * x[n] * x[n - 1] + 2 * y[n] * y[n - 1] + s_max ** 2
            assert a[n - 1] == pytest.approx(2 * x[n] * x[n - 1] / den, rel=1e-14)
            assert b[n - 1] == pytest.approx(2 * y[n] * y[n - 1] / den, rel=1e-14)
            assert g[n - 1] == pytest.approx(s_max ** 2 / den, rel=1e-14)

    def test_normalization(self, rng):
        for _ in range(20):
            exp = random_expansion(rng)
            a, b, g = speed_weights(exp, rng.uniform(1.0, 30.0))
            assert np.abs(a + b + g - 1.0).max() <= 1e-12

    def test_nonpositive_coordinates_error(self):
        exp = GpExpansionPoint(q=np.array([[1.0, -2.0], [3.0, 4.0]]),
                               dist_sq_bound=np.full((1, 1), 700.0),
                               ipn_bound=np.full((1, 1), 1e-9),
                               p_fixed=np.full((1, 1), 0.5))
        with pytest.raises(condense.ExpansionError):
            speed_weights(exp, 10.0)


class TestSpeedMonomial:
    def test_exact_at_expansion(self, rng):
        for _ in range(20):
            exp = random_expansion(rng)
            point = exp.point()
            num, den = speed_ratio_parts(2, s_max=13.0)
            got = condensed_ratio_value(num, den, point, point)
            want = exact_ratio_value(num, den, point)
            assert got == pytest.approx(want, rel=1e-10)

    def test_conservative_everywhere(self, rng):
        num, den = speed_ratio_parts(1, s_max=13.0)
        for _ in range(100):
            exp = random_expansion(rng, n_count=1)
            anchor = exp.point()
            probe = random_expansion(rng, n_count=1).point()
            assert (condensed_ratio_value(num, den, anchor, probe)
                    >= exact_ratio_value(num, den, probe) - 1e-12)

    def test_zero_displacement_value(self):
        c = (55.0, 81.0)
        point = {x_key(0): c[0], x_key(1): c[0], y_key(0): c[1], y_key(1): c[1]}
        s_max = 12.5
        num, den = speed_ratio_parts(1, s_max)
        got = condensed_ratio_value(num, den, point, point)
        want = (2 * c[0] ** 2 + 2 * c[1] ** 2) / (2 * c[0] ** 2 + 2 * c[1] ** 2 + s_max ** 2)
        assert got == pytest.approx(want, rel=1e-12)
        assert got < 1.0


class TestDistanceWeights:
    def test_dominant_bound_limit(self):
        exp = GpExpansionPoint(q=np.array([[3.0, 4.0], [3.0, 4.0]]),
                               dist_sq_bound=np.full((1, 1), 1e9),
                               ipn_bound=np.full((1, 1), 1e-9),
                               p_fixed=np.full((1, 1), 0.5))
        eta, kappa, vartheta = distance_epigraph_weights(exp, 0, 1, np.array([2.0, 2.0]))
        assert vartheta > 0.999999
        assert eta + kappa + vartheta == pytest.approx(1.0, abs=1e-12)

    def test_symmetric_thirds(self):
        # 2 x_q x_u = 2 y_q y_u = dist bound
        exp = GpExpansionPoint(q=np.array([[1.0, 1.0], [4.0, 4.0]]),
                               dist_sq_bound=np.full((1, 1), 32.0),
                               ipn_bound=np.full((1, 1), 1e-9),
                               p_fixed=np.full((1, 1), 0.5))
        w = distance_epigraph_weights(exp, 0, 1, np.array([4.0, 4.0]))
        assert w == pytest.approx((1 / 3, 1 / 3, 1 / 3), abs=1e-12)

    def test_quotient(self, rng):
        for _ in range(20):
            exp = random_expansion(rng)
            u = rng.uniform(5.0, 90.0, size=2)
            eta, kappa, vartheta = distance_epigraph_weights(exp, 1, 2, u)
            qx, qy = exp.q[2]
            lb = exp.dist_sq_bound[1, 1]
            den = 2 * qx * u[0] + 2 * qy * u[1] + lb
            assert eta == pytest.approx(2 * qx * u[0] / den, rel=1e-14)
            assert kappa == pytest.approx(2 * qy * u[1] / den, rel=1e-14)
            assert vartheta == pytest.approx(lb / den, rel=1e-14)


class TestDistanceMonomial:
    def test_tight_epigraph_value_one(self, rng):
        altitude = 25.0
        for _ in range(20):
            q = rng.uniform(10.0, 90.0, size=2)
            u = rng.uniform(10.0, 90.0, size=2)
            tight = altitude ** 2 + float(np.sum((q - u) ** 2))
            point = {x_key(1): q[0], y_key(1): q[1], dist_key(0, 1): tight}
            num, den = distance_ratio_parts(0, 1, u, altitude)
            assert condensed_ratio_value(num, den, point, point) == pytest.approx(1.0, rel=1e-10)

    def test_decreasing_in_bound(self):
        altitude, q, u = 25.0, np.array([40.0, 30.0]), np.array([35.0, 45.0])
        tight = altitude ** 2 + float(np.sum((q - u) ** 2))
        anchor = {x_key(1): q[0], y_key(1): q[1], dist_key(0, 1): tight}
        num, den = distance_ratio_parts(0, 1, u, altitude)
        vals = []
        for scale in (1.0, 1.5, 2.0, 4.0):
            probe = dict(anchor)
            probe[dist_key(0, 1)] = tight * scale
            vals.append(condensed_ratio_value(num, den, anchor, probe))
        assert all(a > b for a, b in zip(vals, vals[1:]))

    def test_conservative(self, rng):
        altitude = 25.0
        u = np.array([33.0, 71.0])
        num, den = distance_ratio_parts(0, 1, u, altitude)
        for _ in range(100):
            anchor = {x_key(1): rng.uniform(10, 120), y_key(1): rng.uniform(10, 120),
                      dist_key(0, 1): rng.uniform(650, 3e4)}
            probe = {x_key(1): rng.uniform(10, 120), y_key(1): rng.uniform(10, 120),
                     dist_key(0, 1): rng.uniform(650, 3e4)}
            assert (condensed_ratio_value(num, den, anchor, probe)
                    >= exact_ratio_value(num, den, probe) - 1e-12)


class TestObjectiveTermWeights:
    def test_floor_power_limit(self):
        exp = GpExpansionPoint(q=np.full((2, 2), 50.0),
                               dist_sq_bound=np.full((1, 1), 1000.0),
                               ipn_bound=np.full((1, 1), 1e-8),
                               p_fixed=np.full((1, 1), 1e-8))
        nu, xi = objective_term_weights(exp, ref_gain=1e-3)
        assert nu[0, 0] > 0.99
        assert xi[0, 0] == pytest.approx(1.0 - nu[0, 0], abs=1e-15)

    def test_balance_point(self):
        # dist * ipn == p * mu0 makes the shares exactly one half each
        exp = GpExpansionPoint(q=np.full((2, 2), 50.0),
                               dist_sq_bound=np.full((1, 1), 1000.0),
                               ipn_bound=np.full((1, 1), 5e-7),
                               p_fixed=np.full((1, 1), 5e-4 / 1e-3))
        nu, xi = objective_term_weights(exp, ref_gain=1e-3)
        assert nu[0, 0] == pytest.approx(0.5, abs=1e-12)
        assert xi[0, 0] == pytest.approx(0.5, abs=1e-12)

    def test_quotient_and_normalization(self, rng):
        for _ in range(20):
            exp = random_expansion(rng)
            nu, xi = objective_term_weights(exp, ref_gain=1e-3)
            lp = exp.dist_sq_bound * exp.ipn_bound
            pm = exp.p_fixed * 1e-3
            assert np.allclose(nu, lp / (lp + pm), rtol=1e-14)
            assert np.abs(nu + xi - 1.0).max() <= 1e-12


class TestGammaTerm:
    def test_exact_ratio_at_expansion(self, rng):
        for _ in range(20):
            exp = random_expansion(rng)
            point = exp.point()
            g, n = 1, 2
            gamma = gamma_monomial(g, n, float(exp.p_fixed[g, n - 1]), 1e-3, point)
            lp = point[dist_key(g, n)] * point[ipn_key(g, n)]
            want = lp / (lp + exp.p_fixed[g, n - 1] * 1e-3)
            assert gamma.value(point) == pytest.approx(want, rel=1e-10)
            assert 0.0 < gamma.value(point) < 1.0

    def test_log_linear_three_point_collinearity(self, rng):
        exp = random_expansion(rng)
        point = exp.point()
        gamma = gamma_monomial(0, 1, 0.3, 1e-3, point)
        base = dict(point)
        logs = []
        for scale in (1.0, 2.0, 4.0):  # collinear in log space
            probe = dict(base)
            probe[dist_key(0, 1)] = base[dist_key(0, 1)] * scale
            probe[ipn_key(0, 1)] = base[ipn_key(0, 1)] * scale
            logs.append(math.log(gamma.value(probe)))
        assert logs[2] - logs[1] == pytest.approx(logs[1] - logs[0], abs=1e-10)

    def test_overestimates_exact_ratio(self, rng):
        for _ in range(100):
            exp = random_expansion(rng, g_count=1, n_count=1)
            point = exp.point()
            gamma = gamma_monomial(0, 1, float(exp.p_fixed[0, 0]), 1e-3, point)
            probe = random_expansion(rng, g_count=1, n_count=1).point()
            lp = probe[dist_key(0, 1)] * probe[ipn_key(0, 1)]
            exact = lp / (lp + exp.p_fixed[0, 0] * 1e-3)
            assert gamma.value(probe) >= exact - 1e-12


class TestInterferenceConstraint:
    def test_empty_set_reduces_to_noise_floor(self):
        posy = interference_posynomial(0, 1, interferer_power=0.0,
                                       ref_gain=1e-3, noise_power=1e-9)
        assert len(posy.terms) == 1
        point = {ipn_key(0, 1): 1e-9}
        assert posy.value(point) == pytest.approx(1.0, rel=1e-12)

    def test_tight_epigraph_value_one(self):
        mu0, noise, p_int, dist = 1e-3, 1e-9, 1.2, 900.0
        tight = mu0 * p_int / dist + noise
        posy = interference_posynomial(0, 1, p_int, mu0, noise)
        point = {dist_key(0, 1): dist, ipn_key(0, 1): tight}
        assert posy.value(point) == pytest.approx(1.0, rel=1e-12)

    def test_doubling_bound_halves_value(self):
        posy = interference_posynomial(0, 1, 0.8, 1e-3, 1e-9)
        p1 = {dist_key(0, 1): 1200.0, ipn_key(0, 1): 3e-7}
        p2 = dict(p1)
        p2[ipn_key(0, 1)] = 6e-7
        assert posy.value(p2) == pytest.approx(0.5 * posy.value(p1), rel=1e-12)


class TestMinRateConstraint:
    def test_zero_reservation_always_satisfiable(self, rng):
        exp = random_expansion(rng, g_count=1, n_count=1)
        point = exp.point()
        gamma = gamma_monomial(0, 1, float(exp.p_fixed[0, 0]), 1e-3, point)
        posy = min_rate_posynomial(gamma, 0.0)
        assert posy.value(point) < 1.0

    def test_quarter_bps_threshold(self):
        # 0.25 bps/Hz = 0.25 ln2 nats; mpmath oracle: exp(-0.25 ln2) = 2^-0.25
        want = 0.8408964152537145
        assert math.exp(-0.25 * math.log(2.0)) == pytest.approx(want, rel=1e-12)
        gamma = Monomial.of(want)  # constant monomial exactly at the threshold
        posy = min_rate_posynomial(gamma, 0.25 * math.log(2.0))
        assert posy.value({}) == pytest.approx(1.0, rel=1e-12)

    def test_boundary_feasibility(self, rng):
        exp = random_expansion(rng, g_count=1, n_count=1)
        point = exp.point()
        gamma = gamma_monomial(0, 1, float(exp.p_fixed[0, 0]), 1e-3, point)
        c_rsv = -math.log(gamma.value(point))  # reservation met with equality
        posy = min_rate_posynomial(gamma, c_rsv)
        assert posy.value(point) == pytest.approx(1.0, rel=1e-10)


class TestWeightClamping:
    def test_degenerate_share_clamped_and_renormalized(self):
        posy = Posynomial.of([Monomial.of(1.0, {"a": 1.0}),
                              Monomial.of(1e-30, {"b": 1.0})])
        w = posy.weights({"a": 1.0, "b": 1.0})
        assert w.min() >= 0.99e-9  # clamped share, then renormalized
        assert w.sum() == pytest.approx(1.0, abs=1e-15)
        mono = posy.condense({"a": 1.0, "b": 1.0})
        assert math.isfinite(mono.log_value({"a": 2.0, "b": 0.5}))
