import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nonlocal_lab.intervals import Interval, IntervalUnion, make_union
from nonlocal_lab.levelset import (ConvexCell, CumulativeDistribution, DiagonalContactError, PreconditionError,
                                   ZBand, a_mu_set, band_schedule, cumulative_derivative, cumulative_value,
                                   eta_zero, exceptional_values, gamma_estimate, gamma_lower_bound_check,
                                   image_inner_measure, level_set, liminf_estimate, loc_vs_glob_check,
                                   normalize_for_gamma, olimpico_check, p_of_z, p_versus_derivative,
                                   random_unit_slope_function, z_region_cells, z_region_integral)
from nonlocal_lab.piecewise import affine_function, heaviside, step_function, toy_fold
from nonlocal_lab.weights import Linear, PowerLaw


class TestCells:
    def test_orientation_and_area(self):
        cell = ConvexCell(((0, 2), (0, 1), (1, 2)))
        assert cell.area == Fraction(1, 2)
        assert cell.section(Fraction(1, 2)) == (Fraction(3, 2), 2)
        with pytest.raises(ValueError):
            ConvexCell(((1, 0), (2, 2), (0, 2)))

    def test_triangle_closed_form(self):
        # y - x runs over (1 - x, 1) for each x, and -ln(1 - x) integrates to 1 over (0, 1)
        cell = ConvexCell(((0, 1), (1, 1), (1, 2)))
        assert cell.integral_inv_gap() == pytest.approx(1.0, rel=1e-15)

    def test_diagonal_edge_diverges(self):
        cell = ConvexCell(((0, 0), (1, 1), (0, 1)))
        assert cell.integral_inv_gap() == math.inf

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.integers(1, 12))
    def test_closed_form_matches_quadrature(self, seed, k):
        phi = random_unit_slope_function(np.random.default_rng(seed), pieces=4, denominator=50)
        for _, _, cell in z_region_cells(phi, None, ZBand(0, Fraction(1, 2**k))):
            exact = cell.integral_inv_gap()
            quad, _ = cell.integral_quadrature()
            assert exact == pytest.approx(quad, rel=1e-6, abs=1e-12)


class TestZRegions:
    def test_vertices_lie_in_band(self):
        phi = random_unit_slope_function(np.random.default_rng(3), pieces=5)
        band = ZBand(0, Fraction(1, 8))
        for i, j, cell in z_region_cells(phi, None, band):
            for x, y in cell.vertices:
                assert x <= y
                assert phi.pieces[i][0].lo <= x <= phi.pieces[i][0].hi
                assert phi.pieces[j][0].lo <= y <= phi.pieces[j][0].hi
                (_, si), (_, sj) = phi.pieces[i], phi.pieces[j]
                if y > x:
                    assert (sj.at(y) - si.at(x)) / (y - x) in band

    def test_cells_against_monte_carlo_membership(self):
        phi = toy_fold(Fraction(1, 2))
        band = ZBand(0, Fraction(1, 4))
        area = sum(cell.area for _, _, cell in z_region_cells(phi, None, band))
        rng = np.random.default_rng(0)
        x = rng.uniform(0, 1.5, 400_000)
        y = rng.uniform(0, 1.5, 400_000)
        lo, hi = np.minimum(x, y), np.maximum(x, y)
        f = lambda t: np.where(t < 1, t, t - 1)
        q = (f(hi) - f(lo)) / (hi - lo)
        frac = np.mean((q >= 0) & (q <= 0.25)) * 1.5**2 / 2
        assert frac == pytest.approx(float(area), abs=4e-3)

    @pytest.mark.parametrize("seed", range(5))
    def test_band_additivity(self, seed):
        phi = random_unit_slope_function(np.random.default_rng(seed), pieces=4)
        a, b, c = Fraction(-1, 3), Fraction(1, 7), Fraction(1, 2)
        whole = z_region_integral(phi, None, ZBand(a, c))
        parts = z_region_integral(phi, None, ZBand(a, b)) + z_region_integral(phi, None, ZBand(b, c))
        assert whole == pytest.approx(parts, rel=1e-10)

    def test_diagonal_contact(self):
        with pytest.raises(DiagonalContactError):
            z_region_cells(affine_function([0, 1], [1], [0]), None, ZBand(0, 2))

    def test_empty_band_rejected(self):
        with pytest.raises(ValueError):
            ZBand(1, 0)


class TestLocalVersusGlobal:
    @pytest.mark.parametrize("ell", [Fraction(1, 10), Fraction(1, 2)])
    def test_toy_fold_equality(self, ell):
        phi = toy_fold(ell)
        assert image_inner_measure(phi) == 1
        report = loc_vs_glob_check(phi)
        assert report["passed"]
        assert report["lhs"] == pytest.approx(float(ell), rel=0.02)

    def test_random_functions_satisfy_inequality(self):
        rng = np.random.default_rng(11)
        for _ in range(10):
            assert loc_vs_glob_check(random_unit_slope_function(rng, pieces=4))["passed"]

    def test_schedule_checks(self):
        with pytest.raises(ValueError):
            liminf_estimate(toy_fold(Fraction(1, 2)), None, [Fraction(1, 4), Fraction(1, 2)])
        assert band_schedule(range(2, 4)) == [Fraction(1, 4), Fraction(1, 8)]

    def test_small_slope_rejected(self):
        with pytest.raises(PreconditionError):
            loc_vs_glob_check(affine_function([0, 1], [Fraction(1, 2)], [0]))


class TestLevelSets:
    G = affine_function([0, 1, 2, 3], [2, -1, 3], [0, 3, -5])

    def test_level_set_and_exceptional_values(self):
        K = make_union([(0, 3)])
        assert level_set(self.G, K, 1) == [Fraction(1, 2), 2]
        assert exceptional_values(self.G, K) == {0, 2, 1, 4}

    def test_cumulative_against_grid_count(self):
        I = Interval(0, 3)
        cd = CumulativeDistribution(self.G, make_union([(0, 3)]), I)
        xs = (np.arange(300_000) + 0.5) / 100_000
        gx = np.where(xs < 1, 2 * xs, np.where(xs < 2, 3 - xs, 3 * xs - 5))
        for z in (Fraction(-1), Fraction(1, 2), Fraction(3, 2), Fraction(3), Fraction(5)):
            assert float(cumulative_value(cd, z)) == pytest.approx(np.mean(gx <= float(z)) * 3, abs=1e-4)
        assert cumulative_value(cd, math.inf) == 3 and cumulative_value(cd, -math.inf) == 0

    def test_cumulative_nondecreasing(self):
        cd = CumulativeDistribution(self.G, make_union([(0, 3)]), Interval(0, 3))
        zs = [Fraction(k, 7) for k in range(-7, 40)]
        vals = [cd(z) for z in zs]
        assert all(b >= a for a, b in zip(vals, vals[1:]))

    def test_derivative_formula(self):
        cd = CumulativeDistribution(self.G, make_union([(0, 3)]), Interval(0, 3))
        res = cumulative_derivative(cd, Fraction(3, 2))
        assert res["formula"] == Fraction(1, 2) + 1 + Fraction(1, 3)
        assert res["gap"] == 0.0
        with pytest.raises(PreconditionError):
            cumulative_derivative(cd, 2)

    def test_p_versus_derivative(self):
        g = affine_function([0, 1, 2, 3], [2, -1, 3], [0, 3, -5])
        cd = CumulativeDistribution(g, make_union([(0, 3)]), Interval(0, 3))
        res = p_versus_derivative(cd, Fraction(3, 2))
        assert res["P"] == Fraction(1, 2) + Fraction(1, 6) + Fraction(1, 3)
        assert res["margin"] >= 0
        assert p_of_z(g, make_union([(0, 1)]), Fraction(1, 2)) == 0

    def test_zero_slope_rejected(self):
        with pytest.raises(PreconditionError):
            level_set(step_function([0, 1], [1]), make_union([(0, 1)]), 1)


class TestOlimpico:
    @pytest.mark.parametrize("t", [0.0, 0.25, 0.5, 1.0])
    def test_equality_family(self, t):
        assert olimpico_check([1.0, t, 0.0, 0.0]) == 0
        assert olimpico_check([Fraction(1), Fraction(t)]) == 0

    @settings(max_examples=200, deadline=None)
    @given(st.lists(st.floats(0, 1), min_size=2, max_size=8).filter(lambda r: sum(r) >= 1))
    def test_float_and_fraction_paths_agree(self, r):
        exact = olimpico_check([Fraction(v) for v in r])
        assert olimpico_check(r) == exact
        assert exact >= 0

    def test_preconditions(self):
        for bad in ([1.5, 0.5], [0.2, 0.3], [0.5]):
            with pytest.raises(PreconditionError):
                olimpico_check(bad)


class TestGamma:
    U = heaviside(-1, 1, 0, Fraction(-1, 2), Fraction(1, 2))

    def test_band_integral_closed_form(self):
        mu, delta = Fraction(3), Fraction(1, 100)
        est = gamma_estimate(self.U, self.U.domain, PowerLaw(1.0), mu, delta)
        # y - x ranges over [1/mu, 1/(mu - delta)], where the tent equals t
        assert est["base"] == pytest.approx(float(1 / (mu * (mu - delta))), rel=1e-13)
        assert est["lower"] <= est["value"] <= est["upper"]

    def test_eta_zero_values(self):
        assert eta_zero(normalize_for_gamma(self.U)[0], Fraction(2, 5)) == 1
        stair = step_function([0, Fraction(1, 3), Fraction(2, 3), 1], [-1, 0, 1])
        assert eta_zero(stair, Fraction(4, 5)) == Fraction(3, 7)

    def test_eta_zero_against_grid(self):
        stair = step_function([0, Fraction(1, 3), Fraction(2, 3), 1], [-1, 0, 1])
        J, M = 0.8, 1.0
        xs = (np.arange(1_000_000) + 0.5) / 1_000_000
        ux = np.where(xs < 1 / 3, -1.0, np.where(xs < 2 / 3, 0.0, 1.0))
        eta0 = float(eta_zero(stair, Fraction(4, 5)))
        for eta in np.linspace(0.01, 0.5, 50):
            S = np.mean(((xs < eta) & (ux > -J)) | ((xs > 1 - eta) & (ux < J)))
            if eta < eta0 - 1e-3:
                assert S <= J / (M + J) * eta + 2e-6
            if eta > eta0 + 1e-3:
                assert S > J / (M + J) * eta

    def test_normalization(self):
        v, info = normalize_for_gamma(step_function([0, 1, 2], [5, 1]))
        assert info["negated"] and info["semi_amplitude"] == 2
        assert v(Fraction(1, 2)) == -2 and v(Fraction(3, 2)) == 2
        with pytest.raises(PreconditionError):
            normalize_for_gamma(step_function([0, 1], [1]))

    @pytest.mark.parametrize("w", [Linear(), PowerLaw(0.5), PowerLaw(2.0)])
    def test_lower_bound(self, w):
        report = gamma_lower_bound_check(self.U, self.U.domain, w, [1, 2, 5, 20], Fraction(2, 5))
        assert report["mu0"] == pytest.approx(0.9)
        assert report["passed"]

    def test_lower_bound_preconditions(self):
        with pytest.raises(PreconditionError):
            gamma_lower_bound_check(self.U, self.U.domain, Linear(), [2], Fraction(1, 2))
        with pytest.raises(PreconditionError):
            gamma_lower_bound_check(self.U, self.U.domain, Linear(), [2], 0)

    def test_a_mu_set(self):
        u = normalize_for_gamma(self.U)[0]
        # end values +-1/2 fail both removal conditions when J = 2/5
        assert a_mu_set(u, Fraction(2, 5), 2) == IntervalUnion([u.domain])
        v = step_function([0, Fraction(1, 10), Fraction(9, 10), 1], [-1, 0, 1])
        # eta = (M + J)/mu = 1/5 strips the middle value near both ends
        A = a_mu_set(v, Fraction(4, 5), 9)
        assert A == make_union([(0, Fraction(1, 10)), (Fraction(1, 5), Fraction(4, 5)), (Fraction(9, 10), 1)])
