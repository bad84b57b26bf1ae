"""Piecewise constant / affine functions of one variable and their difference quotients."""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Union

import numpy as np

from .intervals import (DEFAULT_DEPTH_CAP, Interval, IntervalUnion, as_fraction,
                        cantor_left_numerators, cantor_removed)
from .logscalar import LogScalar
from .weights import SequencePair

Number = Union[int, Fraction, float]


class UnassignedPointError(ValueError):
    """The point lies in the null set that no piece covers (e.g. the Cantor set)."""


@dataclass(frozen=True)
class Constant:
    value: Number

    def at(self, x) -> Number:
        return self.value

    @property
    def slope(self) -> int:
        return 0

    @property
    def intercept(self) -> Number:
        return self.value

    def to_dict(self) -> dict:
        return {"kind": "constant", "value": _num_out(self.value)}


@dataclass(frozen=True)
class Affine:
    slope: Number
    intercept: Number

    def at(self, x) -> Number:
        if isinstance(self.slope, float) or isinstance(self.intercept, float):
            return float(self.slope) * float(x) + float(self.intercept)
        return self.slope * as_fraction(x) + self.intercept

    def to_dict(self) -> dict:
        return {"kind": "affine", "slope": _num_out(self.slope), "intercept": _num_out(self.intercept)}


PieceLaw = Union[Constant, Affine]


def _num_out(v):
    if isinstance(v, bool):
        raise TypeError("bool is not a piece value")
    if isinstance(v, int):
        return str(v) if abs(v) > 2**53 else v
    if isinstance(v, Fraction):
        return str(v)
    return float(v)


def _num_in(v) -> Number:
    if isinstance(v, str):
        return Fraction(v) if "/" in v or v.lstrip("-").isdigit() else float(v)
    return v


class PiecewiseFunction:
    """Function given on disjoint open pieces of ``domain``.

    ``null_budget`` is the exact measure of the part of the domain that no
    piece covers; it must equal ``|domain| - sum of piece lengths``.
    """

    def __init__(self, domain: Interval, pieces, null_budget=0):
        self.domain = domain
        self.pieces: tuple[tuple[Interval, PieceLaw], ...] = tuple(sorted(pieces, key=lambda p: p[0].lo))
        self.null_budget = as_fraction(null_budget)
        prev_hi = None
        for iv, _ in self.pieces:
            if iv.lo < domain.lo or iv.hi > domain.hi:
                raise ValueError(f"piece {iv} outside domain {domain}")
            if prev_hi is not None and iv.lo < prev_hi:
                raise ValueError("pieces overlap")
            prev_hi = iv.hi
        covered = sum((iv.length for iv, _ in self.pieces), Fraction(0))
        if covered != domain.length - self.null_budget:
            raise ValueError(f"pieces cover {covered}, expected {domain.length - self.null_budget}")
        self._los = [iv.lo for iv, _ in self.pieces]

    def __repr__(self) -> str:
        return f"PiecewiseFunction(domain={self.domain}, pieces={len(self.pieces)})"

    def piece_index(self, x) -> int:
        x = as_fraction(x)
        k = bisect.bisect_right(self._los, x) - 1
        if k < 0 or not x < self.pieces[k][0].hi or x == self.pieces[k][0].lo:
            raise UnassignedPointError(f"x = {x} is not inside any piece")
        return k

    def eval(self, x) -> Number:
        iv, law = self.pieces[self.piece_index(x)]
        return law.at(x)

    def eval_log(self, x) -> LogScalar:
        return LogScalar.from_value(self.eval(x))

    __call__ = eval

    @property
    def is_piecewise_constant(self) -> bool:
        return all(isinstance(s, Constant) for _, s in self.pieces)

    def slopes(self) -> list[Number]:
        return [s.slope for _, s in self.pieces]

    def restrict(self, A: IntervalUnion | Interval | None = None) -> list[tuple[Interval, PieceLaw]]:
        """Sub-pieces of the pieces intersected with ``A`` (default: the domain)."""
        if A is None:
            return list(self.pieces)
        if isinstance(A, Interval):
            A = IntervalUnion([A])
        out = []
        for iv, law in self.pieces:
            for part in A.intersect(iv):
                out.append((part, law))
        return out

    def bounds(self) -> tuple[Number, Number]:
        """(inf, sup) of the function over its pieces."""
        vals = []
        for iv, law in self.pieces:
            vals.extend([law.at(iv.lo), law.at(iv.hi)])
        return min(vals), max(vals)

    def shifted(self, c) -> "PiecewiseFunction":
        pieces = []
        for iv, s in self.pieces:
            if isinstance(s, Constant):
                pieces.append((iv, Constant(s.value + c)))
            else:
                pieces.append((iv, Affine(s.slope, s.intercept + c)))
        return PiecewiseFunction(self.domain, pieces, self.null_budget)

    def negated(self) -> "PiecewiseFunction":
        pieces = []
        for iv, s in self.pieces:
            if isinstance(s, Constant):
                pieces.append((iv, Constant(-s.value)))
            else:
                pieces.append((iv, Affine(-s.slope, -s.intercept)))
        return PiecewiseFunction(self.domain, pieces, self.null_budget)

    def to_dict(self) -> dict:
        return {
            "domain": [str(self.domain.lo), str(self.domain.hi)],
            "null_budget": str(self.null_budget),
            "pieces": [{"interval": [str(iv.lo), str(iv.hi)], **law.to_dict()} for iv, law in self.pieces],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PiecewiseFunction":
        pieces = []
        for p in d["pieces"]:
            iv = Interval(Fraction(p["interval"][0]), Fraction(p["interval"][1]))
            if p["kind"] == "constant":
                law = Constant(_num_in(p["value"]))
            elif p["kind"] == "affine":
                law = Affine(_num_in(p["slope"]), _num_in(p["intercept"]))
            else:
                raise ValueError(f"unknown piece kind {p['kind']!r}")
            pieces.append((iv, law))
        dom = Interval(Fraction(d["domain"][0]), Fraction(d["domain"][1]))
        return cls(dom, pieces, Fraction(d.get("null_budget", "0")))


# ---------------------------------------------------------------------------
# fixtures
# ---------------------------------------------------------------------------

def heaviside(a=-1, b=1, jump_at=0, low=0, high=1) -> PiecewiseFunction:
    """``low`` on (a, jump_at) and ``high`` on (jump_at, b)."""
    a, b, c = as_fraction(a), as_fraction(b), as_fraction(jump_at)
    return PiecewiseFunction(Interval(a, b), [(Interval(a, c), Constant(low)), (Interval(c, b), Constant(high))])


def step_function(cuts, values) -> PiecewiseFunction:
    """Constant ``values[k]`` on (cuts[k], cuts[k+1])."""
    cuts = [as_fraction(c) for c in cuts]
    if len(values) != len(cuts) - 1:
        raise ValueError("need len(values) == len(cuts) - 1")
    pieces = [(Interval(a, b), Constant(v)) for a, b, v in zip(cuts, cuts[1:], values)]
    return PiecewiseFunction(Interval(cuts[0], cuts[-1]), pieces)


def affine_function(cuts, slopes, intercepts) -> PiecewiseFunction:
    cuts = [as_fraction(c) for c in cuts]
    pieces = [(Interval(a, b), Affine(m, q)) for a, b, m, q in zip(cuts, cuts[1:], slopes, intercepts)]
    return PiecewiseFunction(Interval(cuts[0], cuts[-1]), pieces)


def toy_fold(ell) -> PiecewiseFunction:
    """x on (0, 1) and x - 1 on (1, 1 + ell): slope 1 everywhere, image (0, 1)."""
    ell = as_fraction(ell)
    if not 0 < ell < 1:
        raise ValueError("ell must lie in (0, 1)")
    return affine_function([0, 1, 1 + ell], [1, 1], [0, -1])


def build_cantor_function(seq: SequencePair, n_max: int,
                          depth_cap: int = DEFAULT_DEPTH_CAP) -> PiecewiseFunction:
    """u = k_n on A_n for n <= n_max; the rest of (0, 1) is the null budget.

    Points of the Cantor set (and of A_n, n > n_max) are left unassigned.
    """
    pieces = []
    for n in range(1, n_max + 1):
        k_n = seq.k_exact(n)
        for iv in cantor_removed(n, depth_cap):
            pieces.append((iv, Constant(k_n)))
    budget = Fraction(2, 3) ** n_max
    return PiecewiseFunction(Interval(0, 1), pieces, budget)


def build_phi_mu(u: PiecewiseFunction, mu) -> PiecewiseFunction:
    """phi(x) = x - u(x)/mu; constant pieces c become Affine(1, -c/mu)."""
    if mu <= 0:
        raise ValueError("mu must be positive")
    exact = isinstance(mu, (int, Fraction))
    pieces = []
    for iv, s in u.pieces:
        m, q = s.slope, s.intercept
        if exact and not isinstance(q, float) and not isinstance(m, float):
            mu_f = as_fraction(mu)
            pieces.append((iv, Affine(1 - Fraction(m) / mu_f, -Fraction(q) / mu_f)))
        else:
            pieces.append((iv, Affine(1 - float(m) / float(mu), -float(q) / float(mu))))
    return PiecewiseFunction(u.domain, pieces, u.null_budget)


# ---------------------------------------------------------------------------
# difference quotients
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DifferenceQuotient:
    value: LogScalar
    x: Number
    y: Number
    exact: Fraction | None = None

    def __float__(self) -> float:
        return float(self.exact) if self.exact is not None else self.value.to_float()


def difference_quotient(u: PiecewiseFunction, x, y) -> DifferenceQuotient:
    """(u(y) - u(x)) / (y - x) for x < y, exact whenever the inputs are rational."""
    if not x < y:
        raise ValueError("difference quotient needs x < y")
    ux, uy = u.eval(x), u.eval(y)
    if not any(isinstance(v, float) for v in (ux, uy, x, y)):
        q = (Fraction(uy) - Fraction(ux)) / (as_fraction(y) - as_fraction(x))
        return DifferenceQuotient(LogScalar.from_value(q), x, y, q)
    num = LogScalar.from_value(uy) - LogScalar.from_value(ux)
    return DifferenceQuotient(num / LogScalar.from_value(float(y) - float(x)), x, y)


def quotient_bounds_check(seq: SequencePair, i: int, j: int, samples: int = 0, *,
                          seed: int = 0, dyadic_bits: int = 20) -> dict:
    """Check mu_{j-1} + 3 <= (k_j - k_i)/(y - x) <= mu_j on A_i x A_j in integer arithmetic.

    All interval endpoint pairs are tested, then ``samples`` random pairs of
    dyadic interior points.  Distances are integers in units of
    3**-j * 2**-dyadic_bits, so every comparison is exact.
    """
    if not 1 <= i < j:
        raise ValueError("need 1 <= i < j")
    if j > seq.exact_cap:
        raise ValueError(f"j = {j} exceeds the exact-integer bound {seq.exact_cap}")
    dk = seq.k_exact(j) - seq.k_exact(i)
    lower = seq.mu_exact(j - 1) + 3
    upper = seq.mu_exact(j)
    scale = 3**j

    P = cantor_left_numerators(i) * 3 ** (j - i)   # units of 3**-j
    Li = 3 ** (j - i)
    Q = cantor_left_numerators(j)
    xs = np.concatenate([P, P + Li])
    ys = np.concatenate([Q, Q + 1])
    D = np.abs(ys[None, :] - xs[:, None]).ravel()

    def count(D, unit):
        # q = dk * unit / D ; lower <= q  <=>  D <= dk*unit // lower ; q <= upper <=> D >= ceil(dk*unit/upper)
        t_low = min((dk * unit) // lower, 2**62)
        t_up = min(-(-(dk * unit) // upper), 2**62)
        ok = (D <= t_low) & (D >= t_up) & (D > 0)
        return int(ok.sum()), int(D.min()), int(D.max())

    n_end, dmin, dmax = count(D, scale)
    n_total = D.size
    n_pass = n_end
    extremes = [Fraction(dk * scale, dmax), Fraction(dk * scale, dmin)]

    if samples:
        rng = np.random.default_rng(seed)
        m = 2**dyadic_bits
        px = rng.integers(0, len(P), samples)
        qy = rng.integers(0, len(Q), samples)
        rx = rng.integers(1, Li * m, samples)
        ry = rng.integers(1, m, samples)
        X = P[px] * m + rx
        Y = Q[qy] * m + ry
        DR = np.abs(Y - X)
        ok, rmin, rmax = count(DR, scale * m)
        n_pass += ok
        n_total += samples
        extremes += [Fraction(dk * scale * m, rmax), Fraction(dk * scale * m, rmin)]

    q_min, q_max = min(extremes), max(extremes)
    return dict(
        i=i, j=j,
        pairs_checked=n_total,
        passed=n_pass,
        violations=n_total - n_pass,
        ok=n_pass == n_total,
        min_quotient=q_min,
        max_quotient=q_max,
        lower_bound=lower,
        upper_bound=upper,
        lower_margin=float(q_min / lower - 1),
        upper_margin=float(1 - q_max / upper),
        # the chain quotient >= k_j - k_i >= k_j - k_{j-1} >= mu_{j-1} + 3
        lower_chain=(dk >= seq.k_exact(j) - seq.k_exact(j - 1) >= lower),
        # the chain quotient <= 3^j (k_j - k_i) <= 3^j k_j <= mu_j
        upper_chain=(scale * dk <= scale * seq.k_exact(j) <= upper),
    )
