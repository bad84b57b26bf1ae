"""Monte Carlo estimators used as an independent check on the deterministic integrals."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .intervals import Interval
from .levelset import ConvexCell

DEFAULT_SAMPLES = 10_000_000
DEFAULT_CHUNK = 1_000_000


@dataclass(frozen=True)
class MCResult:
    mean: float
    stderr: float
    samples: int

    def agrees_with(self, value: float, sigmas: float = 3.0) -> bool:
        return abs(self.mean - value) <= sigmas * self.stderr + 1e-15 * abs(value)

    def to_dict(self) -> dict:
        return dict(mean=self.mean, stderr=self.stderr, samples=self.samples)


class _Accumulator:
    def __init__(self):
        self.n = 0
        self.total = 0.0
        self.total_sq = 0.0

    def add(self, values: np.ndarray):
        self.n += values.size
        self.total += float(values.sum())
        self.total_sq += float(np.square(values).sum())

    def result(self) -> MCResult:
        mean = self.total / self.n
        var = max(self.total_sq / self.n - mean * mean, 0.0)
        return MCResult(mean, math.sqrt(var / (self.n - 1)), self.n)


def _chunks(n: int, chunk: int):
    while n > 0:
        m = min(n, chunk)
        yield m
        n -= m


def mc_interval(f: Callable[[np.ndarray], np.ndarray], a: float, b: float, *,
                samples: int = DEFAULT_SAMPLES, seed: int = 0, chunk: int = DEFAULT_CHUNK) -> MCResult:
    """Plain Monte Carlo estimate of the integral of a vectorized f over [a, b]."""
    rng = np.random.default_rng(seed)
    acc = _Accumulator()
    for m in _chunks(samples, chunk):
        t = a + (b - a) * rng.random(m)
        acc.add((b - a) * f(t))
    return acc.result()


def mc_product(f: Callable[[np.ndarray, np.ndarray], np.ndarray], I: Interval, J: Interval, *,
               samples: int = DEFAULT_SAMPLES, seed: int = 0, chunk: int = DEFAULT_CHUNK,
               power: float = 4.0) -> MCResult:
    """Estimate of the integral of f(x, y) over I x J with J to the right of I.

    Points are drawn as x = I.hi - |I| U**p and y = J.lo + |J| V**p, which
    concentrates samples at the corner nearest the diagonal and keeps the
    variance finite for kernels blowing up like (y - x)**(-3/2) there.
    """
    rng = np.random.default_rng(seed)
    li, lj = float(I.length), float(J.length)
    xi, yj = float(I.hi), float(J.lo)
    acc = _Accumulator()
    for m in _chunks(samples, chunk):
        u, v = rng.random(m), rng.random(m)
        up, vp = u**power, v**power
        x, y = xi - li * up, yj + lj * vp
        jac = (power * li * up / np.where(u > 0, u, 1.0)) * (power * lj * vp / np.where(v > 0, v, 1.0))
        acc.add(f(x, y) * jac)
    return acc.result()


def mc_cell_inv_gap(cell: ConvexCell, *, samples: int = DEFAULT_SAMPLES, seed: int = 0,
                    chunk: int = DEFAULT_CHUNK) -> MCResult:
    """Estimate of the integral of 1/(y - x) over a convex cell, sampling uniformly by triangle fan."""
    verts = np.array([[float(x), float(y)] for x, y in cell.vertices])
    tris = [(verts[0], verts[k], verts[k + 1]) for k in range(1, len(verts) - 1)]
    areas = np.array([abs((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])) / 2
                      for a, b, c in tris])
    total_area = float(areas.sum())
    rng = np.random.default_rng(seed)
    acc = _Accumulator()
    for m in _chunks(samples, chunk):
        which = rng.choice(len(tris), size=m, p=areas / total_area)
        r1, r2 = rng.random(m), rng.random(m)
        s = np.sqrt(r1)
        A = np.array([t[0] for t in tris])[which]
        B = np.array([t[1] for t in tris])[which]
        C = np.array([t[2] for t in tris])[which]
        pts = (1 - s)[:, None] * A + (s * (1 - r2))[:, None] * B + (s * r2)[:, None] * C
        acc.add(total_area / (pts[:, 1] - pts[:, 0]))
    return acc.result()
