import json
import math
from fractions import Fraction

import numpy as np
import pytest
from scipy import integrate

from nonlocal_lab.engine import (FunctionalResult, QuadratureConfig, cantor_cell_bound,
                                 cantor_cell_contribution, cantor_distance_profile, classify,
                                 constant_cell, counterexample_partial_sum, evaluate_truncated,
                                 evaluate_unordered, geometric_schedule, pair_contribution,
                                 same_piece_contribution, truncated_with_error)
from nonlocal_lab.intervals import Interval, cantor_removed, distance_covariogram
from nonlocal_lab.piecewise import Affine, Constant, affine_function, build_cantor_function, heaviside, step_function
from nonlocal_lab.weights import CounterexampleOmega, Linear, PiecewiseTable, PowerLaw, SequencePair

CFG = QuadratureConfig(rel_tol=1e-11, abs_tol=1e-14)
STANDARD = SequencePair.preset("standard")

FIXTURES = {
    "heaviside": heaviside(),
    "staircase": step_function([0, 1, 2, 3], [-1, 0, 1]),
    "uneven": step_function([0, Fraction(1, 3), Fraction(1, 2), 2], [2, Fraction(-1, 2), 1]),
}


def test_zero_jump_contributes_nothing():
    assert constant_cell(Interval(0, 1), Interval(2, 3), 0, Linear(), CFG) == (0.0, 0.0)
    assert evaluate_truncated(step_function([0, 1, 2], [5, 5]), PowerLaw(0.5), None, 1e-3) == 0.0


def test_separated_unit_pair_is_log_four_thirds():
    # omega(mu) = mu, unit jump: the ordered cell is the integral of 1/t^2 against the tent
    val, err = constant_cell(Interval(0, 1), Interval(2, 3), 1, Linear(), CFG)
    assert val == pytest.approx(math.log(4 / 3), rel=1e-12)
    assert err < 1e-10


@pytest.mark.parametrize("w", [PowerLaw(0.5), PowerLaw(1.5, 2.0), PiecewiseTable(((0, 0), (1, 3), (4, 5)))])
def test_constant_cell_against_2d_quadrature(w):
    I, J, delta = Interval(0, 1), Interval(Fraction(3, 2), 3), Fraction(7, 3)
    val, _ = constant_cell(I, J, delta, w, CFG)
    ref, _ = integrate.dblquad(lambda y, x: w.value(float(delta) / (y - x)) / (y - x), 0, 1, 1.5, 3,
                               epsabs=1e-13, epsrel=1e-11)
    assert val == pytest.approx(ref, rel=1e-8)


def test_affine_route_matches_constant_route():
    I, J = Interval(0, 1), Interval(2, 3)
    w = PowerLaw(0.5)
    a = pair_contribution((I, Constant(0)), (J, Constant(2)), w, CFG)
    b = pair_contribution((I, Affine(0, 0)), (J, Affine(0, 2)), w, CFG)
    assert a == pytest.approx(b, rel=1e-7)


def test_same_piece_closed_form():
    piece = (Interval(0, 2), Affine(3, 0))
    w = PowerLaw(1.0)
    eps = 1e-3
    ref = integrate.quad(lambda t: 3 * (2 - t) / t, eps, 2, epsrel=1e-13)[0]
    assert same_piece_contribution(piece, w, eps) == pytest.approx(ref, rel=1e-12)
    assert same_piece_contribution(piece, w, 0.0) == math.inf
    assert same_piece_contribution((Interval(0, 2), Constant(7)), w, 0.0) == 0.0


@pytest.mark.parametrize("name", sorted(FIXTURES))
def test_ordered_sum_doubles_to_unordered(name):
    u = FIXTURES[name]
    w = PowerLaw(0.5)
    ordered = evaluate_truncated(u, w, None, 1e-4, CFG)
    assert evaluate_unordered(u, w, None, 1e-4, CFG) == pytest.approx(ordered, rel=1e-10)


@pytest.mark.parametrize("name", sorted(FIXTURES))
def test_truncation_is_monotone(name):
    u = FIXTURES[name]
    vals = [evaluate_truncated(u, PowerLaw(1.0), None, e, CFG) for e in geometric_schedule(2, 12)]
    assert all(b >= a - 1e-12 for a, b in zip(vals, vals[1:]))


def test_truncation_rejects_oversized_eps():
    with pytest.raises(ValueError):
        evaluate_truncated(heaviside(), Linear(), Interval(0, 1), 2.0)


def test_thread_count_does_not_change_result():
    u = build_cantor_function(STANDARD, 3)
    w = PowerLaw(0.5)
    one = truncated_with_error(u, w, None, 1e-3, QuadratureConfig(threads=1))
    four = truncated_with_error(u, w, None, 1e-3, QuadratureConfig(threads=4))
    assert one == four


class TestClassification:
    def test_heaviside_square_root_weight_is_finite(self):
        res = classify(heaviside(), PowerLaw(0.5), None, geometric_schedule(6, 20), CFG)
        assert res.kind == "finite"
        # the two halves touch at 0, so the tent of y - x is min(t, 2 - t) on [0, 2]
        ref = 2 * integrate.quad(lambda t: t**-1.5 * min(t, 2 - t), 0, 2, points=[1], epsrel=1e-13)[0]
        assert res.value == pytest.approx(ref, rel=1e-6)

    def test_heaviside_linear_weight_diverges(self):
        res = classify(heaviside(), Linear(), None, geometric_schedule(6, 20), CFG)
        assert res.kind == "divergent"
        assert res.rate_model == "logarithmic"
        assert res.slope == pytest.approx(2.0, rel=1e-3)

    def test_identity_function_diverges(self):
        res = classify(affine_function([0, 1], [1], [0]), Linear(), None, geometric_schedule(4, 16), CFG)
        assert res.kind == "divergent"

    def test_constant_function_is_zero(self):
        res = classify(step_function([0, 1], [3]), Linear(), None, geometric_schedule(4, 10), CFG)
        assert res.kind == "finite" and res.value == 0.0

    def test_schedule_validation(self):
        with pytest.raises(ValueError):
            classify(heaviside(), Linear(), None, [1e-2, 1e-3, 1e-4])
        with pytest.raises(ValueError):
            classify(heaviside(), Linear(), None, [1e-4, 1e-3, 1e-2, 1e-1])

    def test_result_serializes(self):
        res = classify(heaviside(), PowerLaw(0.5), None, geometric_schedule(6, 10), CFG)
        back = json.loads(res.to_json())
        assert back["kind"] == res.kind
        assert isinstance(FunctionalResult("finite", 1.0).to_dict(), dict)


class TestCantorConstruction:
    @pytest.mark.parametrize("i,j", [(1, 2), (1, 3), (2, 3), (2, 4)])
    def test_profile_matches_pairwise_covariograms(self, i, j):
        V = cantor_distance_profile(i, j)
        pairs = [(I, J) for I in cantor_removed(i) for J in cantor_removed(j)]
        lams = [distance_covariogram(I, J) for I, J in pairs]
        for m in range(0, 3**j + 1, max(1, 3 ** (j - 2))):
            t = Fraction(m, 3**j)
            assert sum(lam(t) for lam in lams) == Fraction(int(V[m]), 3**j)
        assert Fraction(int(V.sum()), 3**j) * Fraction(1, 3**j) == \
            cantor_removed(i).measure * cantor_removed(j).measure

    @pytest.mark.parametrize("i,j", [(1, 2), (1, 3), (2, 3)])
    def test_cell_matches_per_pair_quadrature(self, i, j):
        w = CounterexampleOmega(STANDARD)
        val, err = cantor_cell_contribution(STANDARD, w, i, j)
        delta = STANDARD.k_exact(j) - STANDARD.k_exact(i)
        ref = 0.0
        for I in cantor_removed(i):
            for J in cantor_removed(j):
                a, b = (I, J) if I.hi <= J.lo else (J, I)
                ref += constant_cell(a, b, delta, w, CFG)[0]
        assert val == pytest.approx(ref, rel=1e-8)

    def test_cells_within_bound(self):
        w = CounterexampleOmega(STANDARD)
        for j in range(2, 11):
            for i in range(1, j):
                val, _ = cantor_cell_contribution(STANDARD, w, i, j)
                assert 0 < val <= cantor_cell_bound(STANDARD, j)

    def test_partial_sums_small(self):
        rep = counterexample_partial_sum(STANDARD, None, 6)
        assert rep["monotone"] and rep["dominated"] and rep["cells_within_bound"]
        assert rep["same_set_contribution"] == 0.0
        assert rep["cells_evaluated"] == 15
        with pytest.raises(ValueError):
            counterexample_partial_sum(STANDARD, None, 1)

    def test_diagonal_cell_rejected(self):
        assert cantor_cell_contribution(STANDARD, Linear(), 3, 3) == (0.0, 0.0)
        with pytest.raises(ValueError):
            cantor_distance_profile(2, 2)
