"""Quotient-band regions, level sets, cumulative distributions and the gamma estimator.

A Z region Z(phi, A, E) is the set of ordered pairs x < y in A whose
difference quotient (phi(y) - phi(x)) / (y - x) lies in the band E.  For
piecewise-affine phi it splits into convex polygons, one per ordered pair of
pieces, on which 1/(y - x) is integrated in closed form.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations

import numpy as np
from scipy import integrate

from .intervals import Interval, IntervalUnion, as_fraction
from .piecewise import Affine, Constant, PiecewiseFunction
from .weights import Weight

DEFAULT_BAND_EXPONENTS = range(8, 21)


class DiagonalContactError(ValueError):
    """A piece's own slope lies in the band: the region hugs the diagonal and 1/(y-x) diverges."""


class PreconditionError(ValueError):
    pass


# ---------------------------------------------------------------------------
# polygons
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ZBand:
    q_lo: Fraction
    q_hi: Fraction

    def __post_init__(self):
        lo, hi = as_fraction(self.q_lo), as_fraction(self.q_hi)
        if lo > hi:
            raise ValueError(f"band [{lo}, {hi}] is empty")
        object.__setattr__(self, "q_lo", lo)
        object.__setattr__(self, "q_hi", hi)

    def __contains__(self, q) -> bool:
        return self.q_lo <= as_fraction(q) <= self.q_hi

    @property
    def width(self) -> Fraction:
        return self.q_hi - self.q_lo


def _clip(poly: list[tuple[Fraction, Fraction]], a: Fraction, b: Fraction, c: Fraction):
    """Keep the part of ``poly`` where a*x + b*y + c >= 0 (exact Sutherland-Hodgman)."""
    out = []
    n = len(poly)
    for k in range(n):
        p, q = poly[k], poly[(k + 1) % n]
        fp = a * p[0] + b * p[1] + c
        fq = a * q[0] + b * q[1] + c
        if fp >= 0:
            out.append(p)
        if (fp > 0 > fq) or (fp < 0 < fq):
            s = fp / (fp - fq)
            out.append((p[0] + s * (q[0] - p[0]), p[1] + s * (q[1] - p[1])))
    dedup = []
    for v in out:
        if not dedup or v != dedup[-1]:
            dedup.append(v)
    if len(dedup) > 1 and dedup[0] == dedup[-1]:
        dedup.pop()
    return dedup


def _mean_log(v0: Fraction, v1: Fraction) -> float:
    """Average of ln(v) over a linear v running from v0 to v1 (both >= 0, not both 0)."""
    if v0 == v1:
        return math.log(v0)
    if v0 == 0 or v1 == 0:
        return math.log(v0 + v1) - 1.0
    # (F(v1) - F(v0)) / (v1 - v0) with F(v) = v ln v - v, written to avoid cancellation
    r = (v1 - v0) / v0
    rf = float(r)
    ratio = math.log1p(rf) / rf if rf != 0.0 else 1.0
    return math.log(v0) + float(v1 / v0) * ratio - 1.0


@dataclass(frozen=True)
class ConvexCell:
    """Convex polygon above the diagonal, counterclockwise, with exact vertices."""

    vertices: tuple[tuple[Fraction, Fraction], ...]

    def __post_init__(self):
        verts = tuple((as_fraction(x), as_fraction(y)) for x, y in self.vertices)
        if any(y < x for x, y in verts):
            raise ValueError("cell vertices must satisfy y >= x")
        if _signed_area(verts) < 0:
            verts = verts[::-1]
        object.__setattr__(self, "vertices", verts)

    @property
    def area(self) -> Fraction:
        return _signed_area(self.vertices)

    @property
    def is_degenerate(self) -> bool:
        return len(self.vertices) < 3 or self.area == 0

    def section(self, x) -> tuple[Fraction, Fraction]:
        """Vertical section [low, high] of the closed polygon at abscissa x."""
        x = as_fraction(x)
        ys = []
        vs = self.vertices
        for k in range(len(vs)):
            (x0, y0), (x1, y1) = vs[k], vs[(k + 1) % len(vs)]
            if x0 == x1:
                if x0 == x:
                    ys += [y0, y1]
            elif min(x0, x1) <= x <= max(x0, x1):
                ys.append(y0 + (y1 - y0) * (x - x0) / (x1 - x0))
        if not ys:
            raise ValueError(f"x = {x} outside the cell")
        return min(ys), max(ys)

    def slabs(self):
        """Consecutive abscissae with the sections at both ends (trapezoid decomposition)."""
        xs = sorted({v[0] for v in self.vertices})
        for x0, x1 in zip(xs, xs[1:]):
            yield x0, x1, self.section(x0), self.section(x1)

    def integral_inv_gap(self) -> float:
        """Exact-up-to-logs integral of 1/(y - x) over the cell.

        Each vertical slab contributes the integral of ln(h(x) - x) - ln(l(x) - x),
        i.e. the antiderivative G(x, y) = -(y - x)(ln(y - x) - 1) differenced
        along the slab's top and bottom edges.
        """
        if self.is_degenerate:
            return 0.0
        total = 0.0
        for x0, x1, (l0, h0), (l1, h1) in self.slabs():
            lv0, lv1, hv0, hv1 = l0 - x0, l1 - x1, h0 - x0, h1 - x1
            if lv0 == 0 and lv1 == 0:
                return math.inf
            total += float(x1 - x0) * (_mean_log(hv0, hv1) - _mean_log(lv0, lv1))
        return total

    def integral_quadrature(self, *, epsrel: float = 1e-11, epsabs: float = 1e-15) -> tuple[float, float]:
        """Adaptive 2-D quadrature of 1/(y - x) over the cell (oracle for the closed form)."""
        if self.is_degenerate:
            return 0.0, 0.0
        total = err = 0.0
        for x0, x1, (l0, h0), (l1, h1) in self.slabs():
            fx0, fx1 = float(x0), float(x1)
            w = fx1 - fx0
            sl, sh = float((l1 - l0) / (x1 - x0)), float((h1 - h0) / (x1 - x0))
            fl0, fh0 = float(l0), float(h0)

            def inner(x):
                lo, hi = fl0 + sl * (x - fx0), fh0 + sh * (x - fx0)
                if hi <= lo:
                    return 0.0
                v, _ = integrate.quad(lambda y: 1.0 / (y - x), lo, hi, epsabs=epsabs, epsrel=epsrel)
                return v

            v, e = integrate.quad(inner, fx0, fx0 + w, epsabs=epsabs, epsrel=epsrel, limit=200)
            total += v
            err += e
        return total, err


def _signed_area(verts) -> Fraction:
    s = Fraction(0)
    for k in range(len(verts)):
        (x0, y0), (x1, y1) = verts[k], verts[(k + 1) % len(verts)]
        s += x0 * y1 - x1 * y0
    return s / 2


# ---------------------------------------------------------------------------
# Z regions
# ---------------------------------------------------------------------------

def _exact_coefficients(law) -> tuple[Fraction, Fraction]:
    return as_fraction(law.slope), as_fraction(law.intercept)


def z_region_cells(phi: PiecewiseFunction, A: IntervalUnion | Interval | None, band: ZBand):
    """Cells of Z(phi, A, band): a list of (piece index i, piece index j, ConvexCell), i < j.

    Raises DiagonalContactError when some piece's own slope lies in the band.
    """
    pieces = phi.restrict(A)
    exact = [(iv, *_exact_coefficients(law)) for iv, law in pieces]
    for iv, m, _ in exact:
        if m in band:
            raise DiagonalContactError(
                f"slope {m} of the piece on {iv} lies in [{band.q_lo}, {band.q_hi}]: diagonal contact")
    cells = []
    for (i, (I, mi, qi)), (j, (J, mj, qj)) in combinations(enumerate(exact), 2):
        rect = [(I.lo, J.lo), (I.hi, J.lo), (I.hi, J.hi), (I.lo, J.hi)]
        # Delta phi = mj*y + qj - mi*x - qi ; require q_lo*(y-x) <= Delta phi <= q_hi*(y-x)
        poly = _clip(rect, -(mi - band.q_lo), mj - band.q_lo, qj - qi)
        if len(poly) >= 3:
            poly = _clip(poly, mi - band.q_hi, band.q_hi - mj, qi - qj)
        if len(poly) >= 3:
            cell = ConvexCell(tuple(poly))
            if not cell.is_degenerate:
                cells.append((i, j, cell))
    return cells


def z_region_integral(phi: PiecewiseFunction, A: IntervalUnion | Interval | None, band: ZBand) -> float:
    """Integral of 1/(y - x) over Z(phi, A, band)."""
    return math.fsum(cell.integral_inv_gap() for _, _, cell in z_region_cells(phi, A, band))


def band_schedule(exponents=DEFAULT_BAND_EXPONENTS) -> list[Fraction]:
    return [Fraction(1, 2**k) for k in exponents]


@dataclass(frozen=True)
class LiminfEstimate:
    value: float
    trace: tuple[tuple[float, float], ...]  # (delta, (1/delta) * integral)
    tail_size: int

    def __float__(self) -> float:
        return self.value


def liminf_estimate(phi: PiecewiseFunction, A, band_width_schedule=None) -> LiminfEstimate:
    """Minimum of delta -> (1/delta) * integral over Z(phi, A, [0, delta]) on the last third of the schedule."""
    deltas = [as_fraction(d) for d in (band_width_schedule or band_schedule())]
    if any(b >= a for a, b in zip(deltas, deltas[1:])) or deltas[-1] <= 0:
        raise ValueError("band width schedule must be positive and strictly decreasing")
    trace = tuple((float(d), z_region_integral(phi, A, ZBand(0, d)) / float(d)) for d in deltas)
    tail = max(1, len(trace) // 3)
    return LiminfEstimate(min(v for _, v in trace[-tail:]), trace, tail)


def image_union(phi: PiecewiseFunction, A=None) -> IntervalUnion:
    parts = []
    for iv, law in phi.restrict(A):
        m, q = _exact_coefficients(law)
        if m != 0:
            parts.append(iv.affine_image(m, q))
    return IntervalUnion(parts)


def image_inner_measure(phi: PiecewiseFunction, A=None) -> Fraction:
    """Measure of phi(A); for finitely many affine pieces the image is a finite union, so inner measure is measure."""
    return image_union(phi, A).measure


def _as_union(A, phi: PiecewiseFunction) -> IntervalUnion:
    if A is None:
        return IntervalUnion([phi.domain])
    return IntervalUnion([A]) if isinstance(A, Interval) else A


def loc_vs_glob_check(phi: PiecewiseFunction, A=None, schedule=None, *, rel_tol: float = 0.02) -> dict:
    """Compare the liminf surrogate with measure(A) - measure(phi(A)) for |phi'| >= 1."""
    A = _as_union(A, phi)
    for iv, law in phi.restrict(A):
        if abs(as_fraction(law.slope)) < 1:
            raise PreconditionError(f"slope {law.slope} on {iv} has magnitude below 1")
    est = liminf_estimate(phi, A, schedule)
    rhs = A.measure - image_inner_measure(phi, A)
    tol = rel_tol * abs(float(rhs))
    return dict(
        lhs=est.value,
        rhs=float(rhs),
        rhs_exact=str(rhs),
        margin=est.value - float(rhs),
        tolerance=tol,
        passed=bool(rhs <= 0 or est.value >= float(rhs) - tol),
        trace=[dict(delta=d, value=v) for d, v in est.trace],
        note="liminf approximated by the minimum over the final third of the band schedule",
    )


def random_unit_slope_function(rng: np.random.Generator, pieces: int = 3, denominator: int = 1000) -> PiecewiseFunction:
    """Random partition of (0, 1) into pieces of slope +-1 with random rational shifts."""
    inner = sorted(set(int(c) for c in rng.integers(1, denominator, size=pieces - 1)))
    while len(inner) < pieces - 1:
        inner = sorted(set(inner) | {int(rng.integers(1, denominator))})
    cuts = [Fraction(0), *(Fraction(c, denominator) for c in inner), Fraction(1)]
    out = []
    for a, b in zip(cuts, cuts[1:]):
        slope = 1 if rng.random() < 0.5 else -1
        shift = Fraction(int(rng.integers(-denominator // 2, denominator // 2 + 1)), denominator)
        out.append((Interval(a, b), Affine(slope, shift)))
    return PiecewiseFunction(Interval(0, 1), out)


# ---------------------------------------------------------------------------
# level sets and cumulative distributions
# ---------------------------------------------------------------------------

def _affine_parts(g: PiecewiseFunction, K) -> list[tuple[Interval, Fraction, Fraction]]:
    out = []
    for iv, law in g.restrict(K):
        m, q = _exact_coefficients(law)
        if m == 0:
            raise PreconditionError(f"g has zero slope on {iv}")
        out.append((iv, m, q))
    return out


def level_set(g: PiecewiseFunction, K, z) -> list[Fraction]:
    """Exact solutions of g(x) = z in the closure of each piece of g over K."""
    z = as_fraction(z)
    sols = set()
    for iv, m, q in _affine_parts(g, K):
        x = (z - q) / m
        if iv.lo <= x <= iv.hi:
            sols.add(x)
    return sorted(sols)


def level_set_slopes(g: PiecewiseFunction, K, z) -> list[tuple[Fraction, Fraction]]:
    """(x, g'(x)) for each level-set point, counted once per piece it belongs to."""
    z = as_fraction(z)
    out = []
    for iv, m, q in _affine_parts(g, K):
        x = (z - q) / m
        if iv.lo <= x <= iv.hi:
            out.append((x, m))
    return sorted(out)


def exceptional_values(g: PiecewiseFunction, K) -> set[Fraction]:
    """Images of piece and K endpoints: the finite set excluded from regular values."""
    vals = set()
    for iv, m, q in _affine_parts(g, K):
        vals.add(m * iv.lo + q)
        vals.add(m * iv.hi + q)
    return vals


@dataclass(frozen=True)
class CumulativeDistribution:
    """z -> measure{x in I and K : g(x) <= z}."""

    g: PiecewiseFunction
    K: IntervalUnion
    I: Interval

    @property
    def support(self) -> IntervalUnion:
        return self.K.intersect(self.I)

    def __call__(self, z) -> Fraction:
        return cumulative_value(self, z)


def cumulative_value(cd: CumulativeDistribution, z) -> Fraction:
    if isinstance(z, float) and math.isinf(z):
        return cd.support.measure if z > 0 else Fraction(0)
    z = as_fraction(z)
    total = Fraction(0)
    for iv, m, q in _affine_parts(cd.g, cd.support):
        cut = (z - q) / m
        if m > 0:
            lo, hi = iv.lo, min(iv.hi, cut)
        else:
            lo, hi = max(iv.lo, cut), iv.hi
        if hi > lo:
            total += hi - lo
    return total


DEFAULT_FD_STEPS = (Fraction(1, 10**3), Fraction(1, 10**5), Fraction(1, 10**7))


def cumulative_derivative(cd: CumulativeDistribution, z, h_schedule=DEFAULT_FD_STEPS) -> dict:
    """Centered finite differences of M next to the formula sum 1/|g'(x_i)| over the level set."""
    z = as_fraction(z)
    if z in exceptional_values(cd.g, cd.K):
        raise PreconditionError(f"z = {z} is the image of an endpoint, not a regular value")
    points = level_set_slopes(cd.g, cd.support, z)
    formula = sum((1 / abs(m) for _, m in points), Fraction(0))
    fds = []
    for h in h_schedule:
        h = as_fraction(h)
        fds.append((cumulative_value(cd, z + h) - cumulative_value(cd, z - h)) / (2 * h))
    return dict(
        z=float(z),
        formula=formula,
        finite_differences=[(float(h), fd) for h, fd in zip(h_schedule, fds)],
        gap=abs(float(fds[-1] - formula)),
        level_set=[float(x) for x, _ in points],
    )


def p_of_z(g: PiecewiseFunction, K, z) -> Fraction:
    """Sum over pairs i < j of the level set of 1 / (|g'(x_i)| |g'(x_j)|); zero below two points."""
    r = [1 / abs(m) for _, m in level_set_slopes(g, K, z)]
    if len(r) < 2:
        return Fraction(0)
    return sum((a * b for a, b in combinations(r, 2)), Fraction(0))


def p_versus_derivative(cd: CumulativeDistribution, z) -> dict:
    """Exact margin P(z) - [M'(I, z) - 1]_+, with M' from the level-set formula."""
    points = level_set_slopes(cd.g, cd.support, z)
    if any(abs(m) < 1 for _, m in points):
        raise PreconditionError("the inequality needs |g'| >= 1 on the level set")
    m_prime = sum((1 / abs(m) for _, m in points), Fraction(0))
    p = p_of_z(cd.g, cd.support, z)
    return dict(z=as_fraction(z), P=p, M_prime=m_prime, margin=p - max(m_prime - 1, Fraction(0)))


def olimpico_check(r) -> Fraction:
    """Exact margin sum_{i<j} r_i r_j - (S - 1) for r_i in [0, 1] with S >= 1."""
    if len(r) < 2:
        raise PreconditionError("need at least two numbers")
    if all(isinstance(v, float) for v in r):
        return _olimpico_dyadic(r)
    fr = [as_fraction(v) for v in r]
    _validate_olimpico(fr)
    s = sum(fr, Fraction(0))
    pair = (s * s - sum(v * v for v in fr)) / 2
    return pair - (s - 1)


def _validate_olimpico(values):
    if any(v < 0 or v > 1 for v in values):
        raise PreconditionError("entries must lie in [0, 1]")
    if sum(values) < 1:
        raise PreconditionError("entries must sum to at least 1")


def _olimpico_dyadic(r) -> Fraction:
    # floats are dyadic: rescale to a common power-of-two denominator and stay in integers
    ratios = [v.as_integer_ratio() for v in r]
    if any(not math.isfinite(v) for v in r):
        raise PreconditionError("entries must be finite")
    L = max(d for _, d in ratios)
    n = [p * (L // d) for p, d in ratios]
    if any(v < 0 or v > L for v in n):
        raise PreconditionError("entries must lie in [0, 1]")
    N = sum(n)
    if N < L:
        raise PreconditionError("entries must sum to at least 1")
    pair2 = N * N - sum(v * v for v in n)
    return Fraction(pair2 // 2 - N * L + L * L, L * L)


# ---------------------------------------------------------------------------
# gamma(mu)
# ---------------------------------------------------------------------------

def gamma_estimate(u: PiecewiseFunction, domain, w: Weight, mu, delta) -> dict:
    """(1/delta) * integral over Z(u, domain, [mu - delta, mu]) of omega(Ru) / (y - x).

    omega is bracketed by its extrema over the band; ``value`` uses the band
    midpoint, ``lower``/``upper`` the bracket ends.
    """
    mu, delta = as_fraction(mu), as_fraction(delta)
    if not mu > delta > 0:
        raise ValueError("need mu > delta > 0")
    if not u.is_piecewise_constant:
        raise PreconditionError("gamma estimate expects a piecewise constant function")
    band = ZBand(mu - delta, mu)
    base = z_region_integral(u, domain, band) / float(delta)
    w_min, w_max = w.extrema(mu - delta, mu)
    w_mid = w.value(mu - delta / 2)
    return dict(mu=float(mu), delta=float(delta), base=base,
                value=w_mid * base, lower=w_min * base, upper=w_max * base)


def _endpoint_values(u: PiecewiseFunction) -> tuple[Fraction, Fraction]:
    first, last = u.pieces[0], u.pieces[-1]
    if first[0].lo != u.domain.lo or last[0].hi != u.domain.hi:
        raise PreconditionError("u must have pieces touching both ends of its domain")
    return as_fraction(first[1].value), as_fraction(last[1].value)


def normalize_for_gamma(u: PiecewiseFunction) -> tuple[PiecewiseFunction, dict]:
    """Shift (and if needed negate) u so its end values are -s and +s with s > 0.

    Shifting leaves every difference quotient unchanged; negation is the
    symmetric case of a decreasing pair of end values.
    """
    lo, hi = _endpoint_values(u)
    if lo == hi:
        raise PreconditionError("end values coincide; pick a subinterval with distinct end values")
    negated = hi < lo
    if negated:
        u = u.negated()
        lo, hi = -lo, -hi
    shift = -(lo + hi) / 2
    return u.shifted(shift), dict(negated=negated, shift=shift, semi_amplitude=(hi - lo) / 2)


def eta_zero(u: PiecewiseFunction, J) -> Fraction:
    """Largest eta_0 <= (b - a)/2 with measure(S(eta)) <= J/(M + J) * eta on (0, eta_0)."""
    J = as_fraction(J)
    a, b = u.domain.lo, u.domain.hi
    M = max(abs(as_fraction(s.value)) for _, s in u.pieces)
    c = J / (M + J)
    half = (b - a) / 2
    # measure(S(eta)) is piecewise linear in eta with slope 0, 1 or 2 between these breakpoints
    marks = {Fraction(0), half}
    for iv, _ in u.pieces:
        for e in (iv.lo - a, b - iv.hi, iv.hi - a, b - iv.lo):
            if 0 < e < half:
                marks.add(e)
    marks = sorted(marks)

    def excess(eta):
        left = sum((max(Fraction(0), min(iv.hi, a + eta) - iv.lo)
                    for iv, s in u.pieces if as_fraction(s.value) > -J), Fraction(0))
        right = sum((max(Fraction(0), iv.hi - max(iv.lo, b - eta))
                     for iv, s in u.pieces if as_fraction(s.value) < J), Fraction(0))
        return left + right - c * eta

    prev = Fraction(0)
    for e in marks[1:]:
        f0, f1 = excess(prev), excess(e)
        if f1 > 0:
            return prev + (-f0) * (e - prev) / (f1 - f0)
        prev = e
    return half


def gamma_lower_bound_check(u: PiecewiseFunction, domain, w: Weight, mu_list, J, *,
                            delta=Fraction(1, 1000), rel_tol: float = 1e-9) -> dict:
    """Check gamma(mu) >= J * omega(mu) / mu^2 at tested delta for each mu above mu_0."""
    J = as_fraction(J)
    if J <= 0:
        raise PreconditionError("J must be positive")
    un, norm = normalize_for_gamma(u)
    if not J < norm["semi_amplitude"]:
        raise PreconditionError(
            f"J = {J} must be below the end-value semi-amplitude {norm['semi_amplitude']}")
    M = max(abs(as_fraction(s.value)) for _, s in un.pieces)
    eta0 = eta_zero(un, J)
    if eta0 <= 0:
        raise PreconditionError("no admissible eta_0 for this J")
    mu0 = (M + J) / eta0
    rows = []
    for mu in mu_list:
        mu_f = as_fraction(mu)
        if mu_f <= mu0:
            rows.append(dict(mu=float(mu_f), skipped=True, reason=f"mu <= mu_0 = {float(mu0):.6g}"))
            continue
        est = gamma_estimate(un, domain, w, mu_f, delta)
        bound = float(J) * w.value(mu_f) / float(mu_f) ** 2
        tol = rel_tol * abs(bound)
        rows.append(dict(mu=float(mu_f), skipped=False, gamma_lower=est["lower"], gamma_mid=est["value"],
                         gamma_upper=est["upper"], bound=bound, margin=est["lower"] - bound,
                         passed=bool(est["lower"] >= bound - tol)))
    checked = [r for r in rows if not r["skipped"]]
    return dict(
        J=float(J), M=float(M), eta0=str(eta0), mu0=float(mu0), c0=float(J),
        normalization=dict(negated=norm["negated"], shift=str(norm["shift"])),
        delta=float(as_fraction(delta)), rows=rows,
        passed=bool(checked) and all(r["passed"] for r in checked),
        note="validated at the tested delta; a finite delta cannot certify the liminf",
    )


def a_mu_set(u: PiecewiseFunction, J, mu) -> IntervalUnion:
    """(a, b) minus S(eta) with eta = (M + J)/mu, for a normalized piecewise constant u."""
    J, mu = as_fraction(J), as_fraction(mu)
    a, b = u.domain.lo, u.domain.hi
    M = max(abs(as_fraction(s.value)) for _, s in u.pieces)
    eta = (M + J) / mu
    keep = []
    for iv, s in u.pieces:
        v = as_fraction(s.value)
        parts = [iv]
        if v > -J:
            parts = [p for q in parts for p in _minus(q, Interval(a, a + eta))]
        if v < J:
            parts = [p for q in parts for p in _minus(q, Interval(b - eta, b))]
        keep.extend(parts)
    return IntervalUnion(keep)


def _minus(I: Interval, cut: Interval) -> list[Interval]:
    out = []
    if I.lo < min(I.hi, cut.lo):
        out.append(Interval(I.lo, min(I.hi, cut.lo)))
    if max(I.lo, cut.hi) < I.hi:
        out.append(Interval(max(I.lo, cut.hi), I.hi))
    return out
