import math
from fractions import Fraction

import numpy as np
import pytest

from nonlocal_lab.intervals import Interval
from nonlocal_lab.levelset import ConvexCell, ZBand, z_region_cells
from nonlocal_lab.montecarlo import MCResult, mc_cell_inv_gap, mc_interval, mc_product
from nonlocal_lab.piecewise import toy_fold


def test_interval_polynomial():
    res = mc_interval(lambda t: t**2, 0.0, 3.0, samples=200_000, seed=1, chunk=50_000)
    assert res.samples == 200_000
    assert res.agrees_with(9.0, sigmas=4)
    assert res.stderr < 0.05


def test_seed_reproducibility_and_chunking():
    f = lambda t: np.sin(t)
    a = mc_interval(f, 0.0, math.pi, samples=100_000, seed=5, chunk=100_000)
    b = mc_interval(f, 0.0, math.pi, samples=100_000, seed=5, chunk=100_000)
    assert a == b
    c = mc_interval(f, 0.0, math.pi, samples=100_000, seed=6)
    assert c.mean != a.mean


def test_product_with_corner_singularity():
    # touching unit intervals: (y - x)^(-1/2) integrates to (8 sqrt 2 - 8)/3
    I, J = Interval(-1, 0), Interval(0, 1)
    res = mc_product(lambda x, y: (y - x) ** -0.5, I, J, samples=400_000, seed=2)
    assert res.agrees_with((8 * math.sqrt(2) - 8) / 3, sigmas=4)


def test_product_separated_log_four_thirds():
    I, J = Interval(0, 1), Interval(2, 3)
    res = mc_product(lambda x, y: (y - x) ** -2.0, I, J, samples=400_000, seed=3, power=1.0)
    assert res.agrees_with(math.log(4 / 3), sigmas=4)


def test_cell_against_closed_form():
    cells = z_region_cells(toy_fold(Fraction(1, 2)), None, ZBand(0, Fraction(1, 4)))
    for _, _, cell in cells:
        res = mc_cell_inv_gap(cell, samples=200_000, seed=4)
        assert res.agrees_with(cell.integral_inv_gap(), sigmas=4)
    tri = ConvexCell(((0, 1), (1, 1), (1, 2)))
    assert mc_cell_inv_gap(tri, samples=200_000, seed=9).agrees_with(1.0, sigmas=4)


def test_result_dict():
    r = MCResult(1.0, 0.1, 10)
    assert r.to_dict() == {"mean": 1.0, "stderr": 0.1, "samples": 10}
    assert r.agrees_with(1.25) and not r.agrees_with(1.5)
