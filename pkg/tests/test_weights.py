import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from nonlocal_lab.weights import (CounterexampleOmega, Linear, PiecewiseTable, PowerLaw, SequencePair,
                                  check_sequence_conditions, first_index_ratio_below, growth_check,
                                  integral_condition_partial, series_tail_bound, weight_from_config)

STANDARD = SequencePair.preset("standard")
OMEGA = CounterexampleOmega(STANDARD)
MU1, MU2, MU3 = (STANDARD.mu_exact(n) for n in (1, 2, 3))


class TestSequences:
    def test_first_terms(self):
        assert STANDARD.k_exact(1) == 10 and STANDARD.k_exact(2) == 10**4
        assert (MU1, MU2, MU3) == (30, 9 * 10**4, 27 * 10**9)

    def test_log_values_match_integers(self):
        for n in range(1, 12):
            assert STANDARD.log_mu_value(n) == pytest.approx(math.log(STANDARD.mu_exact(n)), rel=1e-14)

    def test_conditions_hold_for_default_sequence(self):
        report = check_sequence_conditions(STANDARD, 30)
        assert report["all_hold"]
        assert {r["mode"] for r in report["rows"]} == {"exact", "log"}
        sums = report["partial_sums"]
        assert all(b > a for a, b in zip(sums, sums[1:]))

    def test_small_sequence_is_flagged(self):
        report = check_sequence_conditions(SequencePair.preset("small"), 10)
        assert not report["all_hold"]
        assert any(not r["k_step"] for r in report["rows"])

    def test_config_round_trip(self):
        seq = SequencePair.from_config({"preset": "standard", "exact_cap": 8})
        assert seq.exact_cap == 8
        assert SequencePair.from_config(seq.to_config()) == seq
        with pytest.raises(ValueError):
            SequencePair.preset("nope")

    def test_tail_bound_dominates_explicit_sum(self):
        for N in (5, 20, 40):
            tail = series_tail_bound(STANDARD, N)
            explicit = math.fsum(STANDARD.series_term(n) for n in range(N + 1, 6000))
            assert tail["bound"] >= explicit * (1 - 1e-12)
            assert tail["bound"] <= explicit * (1 + 1e-6)

    def test_ratio_threshold_index(self):
        n = first_index_ratio_below(STANDARD, 0.9)
        assert n == 14
        terms = [STANDARD.series_term(m) for m in range(n, n + 50)]
        assert all(b / a < 0.9 for a, b in zip(terms, terms[1:]))
        assert STANDARD.series_term(n) / STANDARD.series_term(n - 1) >= 0.9


class TestCounterexampleOmega:
    def test_zero_and_ramp(self):
        assert OMEGA.value(0) == 0.0
        assert OMEGA.value(MU1 + 1) == (MU1 + 1) ** 2
        assert OMEGA.value(Fraction(MU1 + 1, 2)) == pytest.approx((MU1 + 1) ** 2 / 2)

    def test_positive_away_from_zero(self):
        near = [Fraction(1, 10**k) for k in range(1, 30)]
        assert all(OMEGA.value(m) > 0 for m in near)
        grid = np.exp(np.linspace(-20, math.log(1e15), 5000))
        assert np.all(OMEGA.value_array(grid) > 0)
        assert all(OMEGA.log_value(L).sign == 1 for L in (-50.0, 0.0, 1e3, 1e6))

    def test_square_zone(self):
        assert OMEGA.value(Fraction(2 * MU1 + 3, 2)) == (MU1 + 1.5) ** 2
        assert OMEGA.value(MU2 + Fraction(3, 2)) == float((MU2 + Fraction(3, 2)) ** 2)

    def test_slow_zone(self):
        mu = 10**6
        assert OMEGA.value(mu) == pytest.approx(math.exp(math.log(mu) ** 0.25), rel=1e-14)

    @pytest.mark.parametrize("joint", [MU1 + 2, MU1 + 3, MU2, MU2 + 1, MU2 + 2, MU2 + 3, MU3, MU3 + 1])
    def test_continuity_at_joints(self, joint):
        # ramps next to mu_n climb by about mu_n^2 per unit, so the step must be tiny
        h = Fraction(1, 10**40)
        left, mid, right = (OMEGA.value(joint + d) for d in (-h, 0, h))
        assert left == pytest.approx(mid, rel=1e-12)
        assert right == pytest.approx(mid, rel=1e-12)

    def test_negative_rejected(self):
        with pytest.raises(ValueError):
            OMEGA.value(-1)
        with pytest.raises(ValueError):
            OMEGA.value_array(np.array([-1.0, 2.0]))

    def test_value_and_log_paths_agree(self):
        rng = np.random.default_rng(7)
        mus = np.exp(rng.uniform(0, math.log(1e15), 1000))
        exact = np.array([OMEGA.value(float(m)) for m in mus])
        via_log = np.exp(OMEGA.log_value_array(np.log(mus)))
        np.testing.assert_allclose(via_log, exact, rtol=1e-9)
        np.testing.assert_allclose(OMEGA.value_array(mus), exact, rtol=1e-11)
        scalar_log = np.array([math.exp(OMEGA.log_value(math.log(m)).log_mag) for m in mus[:100]])
        np.testing.assert_allclose(scalar_log, exact[:100], rtol=1e-9)

    def test_log_path_beyond_float_range(self):
        L = STANDARD.log_mu_value(30) + 5.0
        assert OMEGA.log_value(L).log_mag == pytest.approx(L ** 0.25, rel=1e-15)
        assert OMEGA.log_value(STANDARD.log_mu_value(30) - 5.0).log_mag > 0

    def test_integral_of_square_zone_is_its_length(self):
        val, err = integral_condition_partial(OMEGA, MU1 + 1, MU1 + 2)
        assert val == pytest.approx(1.0, abs=1e-15)

    def test_integral_against_quadrature_and_additivity(self):
        lo, mid, hi = 1, 5000, 10**6
        whole, _ = OMEGA.integral_over(lo, hi)
        a, _ = OMEGA.integral_over(lo, mid)
        b, _ = OMEGA.integral_over(mid, hi)
        assert whole == pytest.approx(a + b, rel=1e-12)
        pts = [float(p) for p in OMEGA.breakpoints(lo, hi)]
        cuts = [lo, *pts, hi]
        ref = math.fsum(integrate.quad(lambda m: OMEGA.value(m) / m**2, x, y, epsrel=1e-12, limit=200)[0]
                        for x, y in zip(cuts, cuts[1:]))
        assert whole == pytest.approx(ref, rel=1e-9)

    def test_growth_beats_every_power_of_log(self):
        # grids are values of log mu; (log mu)^(1/4) overtakes theta log log mu only far out
        assert growth_check(OMEGA, 1.0, [1e2, 1e4, 1e6])["increasing"]
        assert growth_check(OMEGA, 4.0, [1e6, 1e8, 1e10])["increasing"]
        assert not growth_check(OMEGA, 4.0, [1e2, 1e4, 1e6])["increasing"]
        with pytest.raises(ValueError):
            growth_check(OMEGA, 1.0, [2.0, 1.0])

    def test_config_round_trip(self):
        w = weight_from_config(OMEGA.to_config())
        assert w == OMEGA


class TestSimpleWeights:
    def test_power_law(self):
        w = PowerLaw(2.0)
        assert w.value(5) == 25.0
        assert w.value(0) == 0.0
        assert Linear().value(5) == 5.0
        assert w.integral_over(1, 4) == (3.0, 0.0)
        assert PowerLaw(1.5).integral_over(1, 4)[0] == pytest.approx(2.0)
        with pytest.raises(ValueError):
            PowerLaw(0.0)

    def test_big_integer_argument(self):
        assert PowerLaw(0.5).value(10**400) == pytest.approx(1e200, rel=1e-13)
        assert PowerLaw(1.0).log_value(400 * math.log(10)).log_mag == pytest.approx(400 * math.log(10))

    def test_table(self):
        w = PiecewiseTable(((0, 0), (1, 2), (3, 4)))
        assert w.value(Fraction(1, 2)) == 1.0
        assert w.value(10) == 4.0
        assert w.breakpoints(0, 5) == [1, 3]
        ref = integrate.quad(lambda m: w.value(m) / m**2, 1, 3)[0] + integrate.quad(lambda m: 4 / m**2, 3, 8)[0]
        assert w.integral_over(1, 8)[0] == pytest.approx(ref, rel=1e-10)
        with pytest.raises(ValueError):
            PiecewiseTable(((1, 1),))

    def test_config(self):
        assert weight_from_config({"family": "power", "theta": "1/2"}) == PowerLaw(0.5)
        assert weight_from_config({"family": "linear"}) == Linear()
        with pytest.raises(ValueError):
            weight_from_config({"family": "other"})

    @settings(max_examples=100, deadline=None)
    @given(st.floats(min_value=1e-6, max_value=1e12))
    def test_log_path_power(self, mu):
        w = PowerLaw(0.75, 2.0)
        assert math.exp(w.log_value(math.log(mu)).log_mag) == pytest.approx(w.value(mu), rel=1e-12)
