"""Exact interval unions, the middle-third removal sets and covariograms.

All endpoints are :class:`fractions.Fraction` values.  Intervals are open;
boundary points carry no measure, so touching intervals are merged.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from numbers import Rational
from typing import Callable, Iterable, Iterator

import numpy as np
from scipy import integrate

DEFAULT_DEPTH_CAP = 24


class ResourceCapError(RuntimeError):
    """Raised when a construction would exceed a configured size cap."""


def as_fraction(value) -> Fraction:
    """Convert ``value`` to an exact Fraction (floats are converted exactly)."""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, (int, Rational)):
        return Fraction(value)
    if isinstance(value, float):
        if not math.isfinite(value):
            raise ValueError(f"non-finite endpoint {value!r}")
        return Fraction(value)
    if isinstance(value, str):
        return Fraction(value)
    return Fraction(value)


@dataclass(frozen=True, order=True)
class Interval:
    lo: Fraction
    hi: Fraction

    def __post_init__(self):
        lo, hi = as_fraction(self.lo), as_fraction(self.hi)
        if not lo < hi:
            raise ValueError(f"empty interval ({lo}, {hi})")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def length(self) -> Fraction:
        return self.hi - self.lo

    @property
    def midpoint(self) -> Fraction:
        return (self.lo + self.hi) / 2

    def __contains__(self, x) -> bool:
        x = as_fraction(x)
        return self.lo < x < self.hi

    def intersect(self, other: "Interval") -> "Interval | None":
        lo, hi = max(self.lo, other.lo), min(self.hi, other.hi)
        return Interval(lo, hi) if lo < hi else None

    def affine_image(self, scale, shift) -> "Interval":
        scale, shift = as_fraction(scale), as_fraction(shift)
        a, b = scale * self.lo + shift, scale * self.hi + shift
        return Interval(min(a, b), max(a, b))

    def __repr__(self) -> str:
        return f"Interval({self.lo}, {self.hi})"


class IntervalUnion:
    """Finite union of disjoint open intervals, sorted and normalized."""

    __slots__ = ("_parts",)

    def __init__(self, parts: Iterable[Interval] = (), *, _normalized: bool = False):
        parts = list(parts)
        self._parts: tuple[Interval, ...] = tuple(parts if _normalized else _normalize(parts))

    @classmethod
    def from_pairs(cls, pairs: Iterable[tuple]) -> "IntervalUnion":
        return cls(Interval(lo, hi) for lo, hi in pairs)

    @property
    def parts(self) -> tuple[Interval, ...]:
        return self._parts

    def __iter__(self) -> Iterator[Interval]:
        return iter(self._parts)

    def __len__(self) -> int:
        return len(self._parts)

    def __bool__(self) -> bool:
        return bool(self._parts)

    def __eq__(self, other) -> bool:
        return isinstance(other, IntervalUnion) and self._parts == other._parts

    def __hash__(self) -> int:
        return hash(self._parts)

    def __repr__(self) -> str:
        inner = ", ".join(f"({p.lo}, {p.hi})" for p in self._parts)
        return f"IntervalUnion([{inner}])"

    def __contains__(self, x) -> bool:
        x = as_fraction(x)
        return any(x in p for p in self._parts)

    @property
    def measure(self) -> Fraction:
        return sum((p.length for p in self._parts), Fraction(0))

    @property
    def lo(self) -> Fraction:
        return self._parts[0].lo

    @property
    def hi(self) -> Fraction:
        return self._parts[-1].hi

    def union(self, other: "IntervalUnion") -> "IntervalUnion":
        return IntervalUnion(self._parts + other._parts)

    def intersect(self, other: "IntervalUnion | Interval") -> "IntervalUnion":
        if isinstance(other, Interval):
            other = IntervalUnion([other], _normalized=True)
        out = []
        i = j = 0
        a, b = self._parts, other._parts
        while i < len(a) and j < len(b):
            piece = a[i].intersect(b[j])
            if piece is not None:
                out.append(piece)
            if a[i].hi < b[j].hi:
                i += 1
            else:
                j += 1
        return IntervalUnion(out, _normalized=True)

    def scaled(self, scale, shift=0) -> "IntervalUnion":
        return IntervalUnion(p.affine_image(scale, shift) for p in self._parts)


def _normalize(parts: list[Interval]) -> list[Interval]:
    for p in parts:
        if not isinstance(p, Interval):
            raise TypeError(f"expected Interval, got {type(p).__name__}")
    parts = sorted(parts)
    out: list[Interval] = []
    for p in parts:
        if out and p.lo <= out[-1].hi:
            if p.hi > out[-1].hi:
                out[-1] = Interval(out[-1].lo, p.hi)
        else:
            out.append(p)
    return out


def make_union(intervals: Iterable) -> IntervalUnion:
    """Build a normalized union; accepts Interval objects or (lo, hi) pairs.

    Raises ValueError on any pair with lo >= hi.
    """
    parts = [iv if isinstance(iv, Interval) else Interval(*iv) for iv in intervals]
    return IntervalUnion(parts)


def cantor_removed(n: int, depth_cap: int = DEFAULT_DEPTH_CAP) -> IntervalUnion:
    """Return A_n, the open middle thirds removed at step ``n``."""
    nums = cantor_left_numerators(n, depth_cap)
    den = 3**n
    parts = [Interval(Fraction(int(p), den), Fraction(int(p) + 1, den)) for p in nums]
    return IntervalUnion(parts, _normalized=True)


def cantor_left_numerators(n: int, depth_cap: int = DEFAULT_DEPTH_CAP) -> np.ndarray:
    """Left endpoints of the parts of A_n, as integer numerators over 3**n.

    Uses the recursion A_{n+1} = A_n/3 U (2/3 + A_n/3): in units of 3**-(n+1)
    the left endpoints p become p and p + 2*3**n.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if n > depth_cap:
        raise ResourceCapError(f"depth {n} exceeds cap {depth_cap} ({2 ** (n - 1)} parts)")
    nums = np.array([1], dtype=np.int64)
    for m in range(1, n):
        nums = np.concatenate([nums, nums + 2 * 3**m])
    return nums


def union_distance(U: IntervalUnion, V: IntervalUnion) -> Fraction:
    """Exact infimum of |x - y| over x in U, y in V (0 when they overlap)."""
    if not U or not V:
        raise ValueError("distance requires nonempty unions")
    a, b = U.parts, V.parts
    best = None
    i = j = 0
    # merge walk: the closest pair is always between neighbours in sorted order
    while i < len(a) and j < len(b):
        p, q = a[i], b[j]
        if p.hi <= q.lo:
            d = q.lo - p.hi
        elif q.hi <= p.lo:
            d = p.lo - q.hi
        else:
            return Fraction(0)
        if best is None or d < best:
            best = d
        if p.hi < q.hi:
            i += 1
        else:
            j += 1
    return best


@dataclass(frozen=True)
class Covariogram:
    """Piecewise-linear tent t -> measure{x in I : x + t in J}.

    ``breakpoints`` are (t, value) pairs; the function is linear between
    consecutive breakpoints and zero outside the first/last.
    """

    breakpoints: tuple[tuple[Fraction, Fraction], ...]

    @property
    def support(self) -> tuple[Fraction, Fraction]:
        return self.breakpoints[0][0], self.breakpoints[-1][0]

    def __call__(self, t) -> Fraction:
        t = as_fraction(t)
        bp = self.breakpoints
        if t <= bp[0][0] or t >= bp[-1][0]:
            return Fraction(0)
        for (t0, v0), (t1, v1) in zip(bp, bp[1:]):
            if t0 <= t <= t1:
                return v0 + (v1 - v0) * (t - t0) / (t1 - t0)
        raise AssertionError("unreachable")

    def linear_pieces(self) -> list[tuple[Fraction, Fraction, Fraction, Fraction]]:
        """(t0, t1, alpha, beta) with value alpha + beta*t on [t0, t1]."""
        out = []
        for (t0, v0), (t1, v1) in zip(self.breakpoints, self.breakpoints[1:]):
            if t1 == t0:
                continue
            beta = (v1 - v0) / (t1 - t0)
            out.append((t0, t1, v0 - beta * t0, beta))
        return out

    def mass(self) -> Fraction:
        return sum(((t1 - t0) * (v0 + v1) / 2
                    for (t0, v0), (t1, v1) in zip(self.breakpoints, self.breakpoints[1:])),
                   Fraction(0))

    def integrate_power(self, p: int, t_min=0) -> float:
        """Closed form of the integral of lambda(t) * t**(-p), p in {1, 2}, over t >= t_min."""
        total = 0.0
        t_min = as_fraction(t_min)
        for t0, t1, alpha, beta in self.linear_pieces():
            t0 = max(t0, t_min)
            if t0 >= t1:
                continue
            a, b, lo, hi = float(alpha), float(beta), float(t0), float(t1)
            if p == 1:
                if alpha != 0 and lo == 0:
                    return math.inf
                log_part = a * math.log(hi / lo) if alpha != 0 else 0.0
                total += log_part + b * (hi - lo)
            elif p == 2:
                if lo == 0 and (alpha != 0 or beta != 0):
                    return math.inf
                total += a * (1 / lo - 1 / hi) + b * math.log(hi / lo)
            else:
                raise ValueError("only p in {1, 2} has a closed form here")
        return total

    def integrate(self, f: Callable[[float], float], *, t_min: float = 0.0,
                  log_substitution: bool = True, epsabs: float = 1e-12,
                  epsrel: float = 1e-10, limit: int = 200) -> tuple[float, float]:
        """Integral of f(t) * lambda(t) over t >= t_min; returns (value, abs error).

        With ``log_substitution`` each linear piece is integrated in s = log t.
        """
        total = err = 0.0
        for t0, t1, alpha, beta in self.linear_pieces():
            lo, hi = max(float(t0), t_min), float(t1)
            if lo >= hi:
                continue
            a, b = float(alpha), float(beta)
            if log_substitution:
                def g(s, a=a, b=b):
                    t = math.exp(s)
                    # s = -inf maps to t = 0, where an integrable f * lambda * t vanishes
                    return f(t) * (a + b * t) * t if t > 0 else 0.0
                s_lo = math.log(lo) if lo > 0 else -np.inf
                val, e = integrate.quad(g, s_lo, math.log(hi), epsabs=epsabs,
                                        epsrel=epsrel, limit=limit)
            else:
                val, e = integrate.quad(lambda t, a=a, b=b: f(t) * (a + b * t), lo, hi,
                                        epsabs=epsabs, epsrel=epsrel, limit=limit)
            total += val
            err += e
        return total, err


def covariogram(I: Interval, J: Interval) -> Covariogram:
    """Tent function of y - x for x uniform on I and y on J, with J right of I.

    Touching intervals (I.hi == J.lo) are allowed; the support then starts at 0.
    """
    if I.hi > J.lo:
        raise ValueError("covariogram requires J to lie to the right of I")
    a, b = I.length, J.length
    gap = J.lo - I.hi
    short, long_ = min(a, b), max(a, b)
    pts = [(gap, Fraction(0)), (gap + short, short), (gap + long_, short), (gap + a + b, Fraction(0))]
    dedup = [pts[0]]
    for p in pts[1:]:
        if p[0] != dedup[-1][0]:
            dedup.append(p)
    return Covariogram(tuple(dedup))


def distance_covariogram(I: Interval, J: Interval) -> Covariogram:
    """Covariogram of |y - x| for disjoint I, J in either order."""
    return covariogram(I, J) if I.hi <= J.lo else covariogram(J, I)

