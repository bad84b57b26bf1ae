"""Weight functions omega, the counterexample weight and its step sequences.

Every weight supports three evaluation paths:

* ``value(mu)``: exact-input evaluation (``mu`` may be an int, Fraction or
  float and is located among the breakpoints exactly), returning a float;
* ``log_value(log_mu)``: log-domain evaluation returning a :class:`LogScalar`,
  used when ``mu`` itself overflows a float;
* ``log_value_array(log_mu)``: a vectorized version of the latter for quadrature.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache

import mpmath
import numpy as np
from scipy import integrate

from .intervals import as_fraction
from .logscalar import LogScalar, exact_log

LN2_3 = math.log(2.0 / 3.0)
_EPS = np.finfo(float).eps


# ---------------------------------------------------------------------------
# step sequences k_n, mu_n
# ---------------------------------------------------------------------------

SEQUENCE_PRESETS = {
    # k_n = 10**(n**2), mu_n = 3**n * k_n
    "standard": dict(k_base=10, k_exponent=(1, 0, 0), mu_factor=3),
    # k_n = 10**n grows too slowly: k_{n+1} >= k_n + mu_n + 3 fails
    "small": dict(k_base=10, k_exponent=(0, 1, 0), mu_factor=3),
    # k_n = 1 for every n
    "constant": dict(k_base=10, k_exponent=(0, 0, 0), mu_factor=3),
}


@dataclass(frozen=True)
class SequencePair:
    """Integer sequences k_n = k_base**(a n^2 + b n + c) and mu_n = mu_factor**n * k_n.

    ``exact_cap`` bounds the indices for which conditions are confirmed in
    big-integer arithmetic; beyond it checks run in the log domain.
    """

    k_base: int = 10
    k_exponent: tuple[int, int, int] = (1, 0, 0)
    mu_factor: int = 3
    n_max: int = 64
    exact_cap: int = 12
    name: str = "standard"

    @classmethod
    def preset(cls, name: str, **overrides) -> "SequencePair":
        try:
            params = dict(SEQUENCE_PRESETS[name])
        except KeyError:
            raise ValueError(f"unknown sequence preset {name!r}") from None
        params.update(overrides)
        return cls(name=name, **params)

    @classmethod
    def from_config(cls, cfg: dict | str) -> "SequencePair":
        if isinstance(cfg, str):
            return cls.preset(cfg)
        cfg = dict(cfg)
        if "preset" in cfg:
            return cls.preset(cfg.pop("preset"), **_seq_fields(cfg))
        return cls(name=cfg.pop("name", "custom"), **_seq_fields(cfg))

    def to_config(self) -> dict:
        return dict(name=self.name, k_base=self.k_base, k_exponent=list(self.k_exponent),
                    mu_factor=self.mu_factor, n_max=self.n_max, exact_cap=self.exact_cap)

    def _exponent(self, n: int) -> int:
        a, b, c = self.k_exponent
        return a * n * n + b * n + c

    def k_exact(self, n: int) -> int:
        return _cached_pow(self.k_base, self._exponent(n))

    def mu_exact(self, n: int) -> int:
        return _cached_pow(self.mu_factor, n) * self.k_exact(n)

    def log_k_value(self, n: int) -> float:
        return self._exponent(n) * math.log(self.k_base)

    def log_mu_value(self, n: int) -> float:
        return n * math.log(self.mu_factor) + self.log_k_value(n)

    def k(self, n: int) -> LogScalar:
        return LogScalar(1, self.log_k_value(n))

    def mu(self, n: int) -> LogScalar:
        return LogScalar(1, self.log_mu_value(n))

    def series_log_term(self, n: int) -> float:
        """log of n^2 (2/3)^n exp((log mu_n)^(1/4))."""
        return 2 * math.log(n) + n * LN2_3 + self.log_mu_value(n) ** 0.25

    def series_term(self, n: int) -> float:
        return math.exp(self.series_log_term(n))


def _seq_fields(cfg: dict) -> dict:
    out = {}
    for key in ("k_base", "mu_factor", "n_max", "exact_cap"):
        if key in cfg:
            out[key] = int(cfg[key])
    if "k_exponent" in cfg:
        out["k_exponent"] = tuple(int(v) for v in cfg["k_exponent"])
    return out


@lru_cache(maxsize=4096)
def _cached_pow(base: int, exp: int) -> int:
    return base**exp


def check_sequence_conditions(seq: SequencePair, n_max: int, *, tail_horizon: int = 20000) -> dict:
    """Check mu_n >= 3^n k_n, k_{n+1} >= k_n + mu_n + 3 and summability of the series.

    Conditions for n <= ``seq.exact_cap`` are decided in big integers,
    beyond it in the log domain.  The series report carries partial sums
    and an explicit bound on the tail after ``n_max``.
    """
    if n_max > seq.n_max:
        raise ValueError(f"n_max {n_max} exceeds sequence n_max {seq.n_max}")
    rows = []
    for n in range(1, n_max + 1):
        if n <= seq.exact_cap:
            k_n, k_next, mu_n = seq.k_exact(n), seq.k_exact(n + 1), seq.mu_exact(n)
            growth = mu_n >= 3**n * k_n
            step = k_next >= k_n + mu_n + 3
            mode = "exact"
        else:
            log3n_k = n * math.log(3) + seq.log_k_value(n)
            growth = seq.log_mu_value(n) >= log3n_k - 1e-12 * abs(log3n_k)
            rhs = seq.k(n) + seq.mu(n) + 3
            step = seq.log_k_value(n + 1) >= rhs.log_mag
            mode = "log"
        rows.append(dict(n=n, mu_growth=bool(growth), k_step=bool(step), mode=mode))
    partial = []
    s = 0.0
    for n in range(1, n_max + 1):
        s += seq.series_term(n)
        partial.append(s)
    tail = series_tail_bound(seq, n_max, horizon=tail_horizon)
    return dict(
        rows=rows,
        all_hold=all(r["mu_growth"] and r["k_step"] for r in rows),
        partial_sums=partial,
        tail_bound=tail["bound"],
        tail=tail,
    )


def series_tail_bound(seq: SequencePair, N: int, *, horizon: int = 20000) -> dict:
    """Upper bound for sum_{n > N} n^2 (2/3)^n exp((log mu_n)^(1/4)).

    Term ratios r(n) = t(n+1)/t(n) are computed on [N, horizon].  For every
    M with r(M) < 1 and r nonincreasing on [M, horizon], the terms up to M
    are summed explicitly and the remainder is bounded by t(M) r(M) / (1 - r(M));
    the smallest such bound is returned.  Monotonicity of r beyond
    ``horizon`` is an assumption recorded in the report.
    """
    logs = np.array([seq.series_log_term(n) for n in range(N, horizon + 2)])
    ratios = np.exp(np.diff(logs))  # ratios[m] = r(N + m)
    # suffix check: r nonincreasing from index m onward
    nonincreasing_suffix = np.ones(len(ratios), dtype=bool)
    for m in range(len(ratios) - 2, -1, -1):
        nonincreasing_suffix[m] = nonincreasing_suffix[m + 1] and ratios[m] >= ratios[m + 1] - 1e-15
    ok = np.nonzero((ratios < 1.0) & nonincreasing_suffix)[0]
    if len(ok) == 0:
        return dict(bound=math.inf, switch_index=None, ratio=None, explicit_terms=0,
                    first_ratio_below_0_9=None, ratio_at_N=float(ratios[0]), horizon=horizon)
    terms = np.exp(logs)
    # any admissible switch point gives a valid bound; keep the smallest
    explicit = np.concatenate([[0.0], np.cumsum(terms[1:])])  # explicit[m] = terms N+1 .. N+m
    r = ratios[ok]
    candidates = explicit[ok] + terms[ok] * r / (1.0 - r)
    best = int(np.argmin(candidates))
    m = int(ok[best])
    below = np.nonzero((ratios < 0.9) & nonincreasing_suffix)[0]
    return dict(
        bound=float(candidates[best]),
        switch_index=N + m,
        ratio=float(ratios[m]),
        explicit_terms=m,
        first_ratio_below_0_9=(N + int(below[0])) if len(below) else None,
        ratio_at_N=float(ratios[0]),
        horizon=horizon,
    )


def first_index_ratio_below(seq: SequencePair, threshold: float, *, start: int = 1,
                            horizon: int = 20000) -> int | None:
    """Smallest n >= start such that r(m) < threshold for every m in [n, horizon]."""
    logs = np.array([seq.series_log_term(n) for n in range(start, horizon + 2)])
    ratios = np.exp(np.diff(logs))
    bad = np.nonzero(ratios >= threshold)[0]
    if len(bad) == 0:
        return start
    n = start + int(bad[-1]) + 1
    return n if n <= horizon else None


# ---------------------------------------------------------------------------
# weights
# ---------------------------------------------------------------------------

class Weight:
    """Base class; subclasses implement the three evaluation paths."""

    family: str = "abstract"

    def value(self, mu) -> float:
        raise NotImplementedError

    def log_value(self, log_mu: float) -> LogScalar:
        raise NotImplementedError

    def log_value_array(self, log_mu: np.ndarray) -> np.ndarray:
        """log omega at exp(log_mu); -inf where omega vanishes."""
        return np.array([self.log_value(float(L)).log_mag for L in np.asarray(log_mu).ravel()]
                        ).reshape(np.shape(log_mu))

    def value_array(self, mu: np.ndarray) -> np.ndarray:
        mu = np.asarray(mu, dtype=float)
        out = np.zeros_like(mu)
        pos = mu > 0
        with np.errstate(divide="ignore"):
            out[pos] = np.exp(self.log_value_array(np.log(mu[pos])))
        return out

    def breakpoints(self, lo, hi) -> list[Fraction]:
        """Exact breakpoints strictly inside (lo, hi); omega is monotone between them."""
        return []

    def extrema(self, lo, hi) -> tuple[float, float]:
        """(min, max) of omega over [lo, hi], from endpoints and interior breakpoints."""
        pts = [as_fraction(lo), *self.breakpoints(lo, hi), as_fraction(hi)]
        vals = [self.value(p) for p in pts]
        return min(vals), max(vals)

    def integral_over(self, lo, hi) -> tuple[float, float]:
        raise NotImplementedError

    def to_config(self) -> dict:
        raise NotImplementedError


def _check_nonnegative(mu):
    if mu < 0:
        raise ValueError(f"weight evaluated at negative argument {mu}")


@dataclass(frozen=True)
class PowerLaw(Weight):
    """omega(mu) = scale * mu**theta."""

    theta: float
    scale: float = 1.0
    family: str = field(default="power", init=False)

    def __post_init__(self):
        if self.theta <= 0 or self.scale <= 0:
            raise ValueError("PowerLaw needs theta > 0 and scale > 0")

    def value(self, mu) -> float:
        _check_nonnegative(mu)
        if mu == 0:
            return 0.0
        try:
            return self.scale * float(mu) ** self.theta
        except OverflowError:
            return math.exp(self.log_value(exact_log(mu)).log_mag)

    def log_value(self, log_mu: float) -> LogScalar:
        return LogScalar(1, math.log(self.scale) + self.theta * log_mu)

    def log_value_array(self, log_mu):
        return math.log(self.scale) + self.theta * np.asarray(log_mu, dtype=float)

    def integral_over(self, lo, hi) -> tuple[float, float]:
        a, b = float(lo), float(hi)
        if self.theta == 1:
            return self.scale * math.log(b / a), 0.0
        p = self.theta - 1
        return self.scale * (b**p - a**p) / p, 0.0

    def to_config(self) -> dict:
        return dict(family="power", theta=self.theta, scale=self.scale)


def Linear(slope: float = 1.0) -> PowerLaw:
    """omega(mu) = slope * mu."""
    return PowerLaw(theta=1.0, scale=slope)


@dataclass(frozen=True)
class PiecewiseTable(Weight):
    """Linear interpolation through (mu, omega) nodes starting at (0, 0); constant after the last."""

    nodes: tuple[tuple[Fraction, Fraction], ...]
    family: str = field(default="table", init=False)

    def __post_init__(self):
        nodes = tuple((as_fraction(m), as_fraction(w)) for m, w in self.nodes)
        if not nodes or nodes[0] != (0, 0):
            raise ValueError("table must start at (0, 0)")
        if any(b[0] <= a[0] for a, b in zip(nodes, nodes[1:])):
            raise ValueError("table abscissae must increase")
        if any(w <= 0 for _, w in nodes[1:]):
            raise ValueError("table values must be positive away from 0")
        object.__setattr__(self, "nodes", nodes)

    def _exact(self, mu: Fraction) -> Fraction:
        xs = [m for m, _ in self.nodes]
        if mu >= xs[-1]:
            return self.nodes[-1][1]
        k = bisect.bisect_right(xs, mu) - 1
        (m0, w0), (m1, w1) = self.nodes[k], self.nodes[k + 1]
        return w0 + (w1 - w0) * (mu - m0) / (m1 - m0)

    def value(self, mu) -> float:
        _check_nonnegative(mu)
        return float(self._exact(as_fraction(mu)))

    def log_value(self, log_mu: float) -> LogScalar:
        mu = math.exp(log_mu) if log_mu < 700 else math.inf
        if mu >= float(self.nodes[-1][0]):
            return LogScalar.from_value(self.nodes[-1][1])
        return LogScalar.from_value(self._exact(Fraction(mu)))

    def log_value_array(self, log_mu):
        xs = np.array([float(m) for m, _ in self.nodes])
        ys = np.array([float(w) for _, w in self.nodes])
        mu = np.exp(np.minimum(np.asarray(log_mu, dtype=float), 700.0))
        with np.errstate(divide="ignore"):
            return np.log(np.interp(mu, xs, ys))

    def breakpoints(self, lo, hi):
        lo, hi = as_fraction(lo), as_fraction(hi)
        return [m for m, _ in self.nodes if lo < m < hi]

    def integral_over(self, lo, hi):
        lo, hi = as_fraction(lo), as_fraction(hi)
        cuts = [lo, *self.breakpoints(lo, hi), hi]
        total = 0.0
        for a, b in zip(cuts, cuts[1:]):
            wa, wb = self._exact(a), self._exact(b)
            beta = (wb - wa) / (b - a)
            alpha = wa - beta * a
            total += float(alpha) * (1 / float(a) - 1 / float(b)) + float(beta) * math.log(float(b) / float(a))
        return total, 0.0

    def to_config(self) -> dict:
        return dict(family="table", nodes=[[str(m), str(w)] for m, w in self.nodes])


def _explog(log_mu):
    """exp((log mu)^(1/4)) in log form: (log mu)^(1/4)."""
    return log_mu ** 0.25


@dataclass(frozen=True)
class CounterexampleOmega(Weight):
    """The weight built on a :class:`SequencePair`.

    * affine ramp from (0, 0) to (mu_1 + 1, (mu_1 + 1)^2);
    * mu^2 on [mu_i + 1, mu_i + 2];
    * affine on [mu_i + 2, mu_i + 3] and on [mu_{i+1}, mu_{i+1} + 1];
    * exp((log mu)^(1/4)) on [mu_i + 3, mu_{i+1}].
    """

    seq: SequencePair = field(default_factory=SequencePair)
    family: str = field(default="counterexample", init=False)

    def __post_init__(self):
        for n in range(1, min(self.seq.n_max, self.seq.exact_cap) + 1):
            if not self.seq.mu_exact(n + 1) > self.seq.mu_exact(n) + 3:
                raise ValueError(f"mu_{n + 1} must exceed mu_{n} + 3")

    # -- segment location -------------------------------------------------

    def _index_exact(self, mu: Fraction) -> int:
        """Largest n >= 1 with mu_n <= mu (0 if mu < mu_1)."""
        n = 0
        while n < self.seq.n_max and self.seq.mu_exact(n + 1) <= mu:
            n += 1
        if n == self.seq.n_max:
            raise ValueError(f"argument beyond mu_{self.seq.n_max}; raise n_max")
        return n

    def _index_log(self, log_mu: float) -> int:
        """Largest n >= 1 with log mu_n <= log_mu, by bisection on the float logs."""
        if log_mu < self.seq.log_mu_value(1):
            return 0
        lo, hi = 1, 2
        while self.seq.log_mu_value(hi) <= log_mu:
            lo, hi = hi, hi * 2
        while hi - lo > 1:
            mid = (lo + hi) // 2
            if self.seq.log_mu_value(mid) <= log_mu:
                lo = mid
            else:
                hi = mid
        return lo

    @staticmethod
    def _E(mu) -> float:
        return math.exp(exact_log(mu) ** 0.25)

    def _segment_value_exact(self, mu: Fraction):
        """Exact-location evaluation; returns a Fraction or float."""
        mu1 = self.seq.mu_exact(1)
        if mu <= mu1 + 1:
            return mu * (mu1 + 1)  # ramp from 0 to (mu1+1)^2
        n = self._index_exact(mu)
        p = self.seq.mu_exact(n)
        d = mu - p
        if d < 1:  # ramp up from E(mu_n) to (mu_n + 1)^2; n >= 2 here
            w0 = Fraction(self._E(p))
            return w0 + ((p + 1) ** 2 - w0) * d
        if d <= 2:
            return mu * mu
        if d < 3:
            w0 = Fraction((p + 2) ** 2)
            w1 = Fraction(self._E(p + 3))
            return w0 + (w1 - w0) * (d - 2)
        return self._E(mu)

    def value_array(self, mu: np.ndarray) -> np.ndarray:
        """Vectorized float evaluation; falls back to the log path above 2**52,
        where floats no longer resolve the unit-width zones."""
        mu = np.asarray(mu, dtype=float)
        if np.any(mu < 0):
            raise ValueError("weight evaluated at negative argument")
        if mu.size == 0:
            return np.zeros_like(mu)
        if float(np.max(mu)) >= 2.0**52:
            return super().value_array(mu)
        marks = []
        n = 1
        while float(self.seq.mu_exact(n)) <= float(np.max(mu)):
            marks.append(float(self.seq.mu_exact(n)))
            n += 1
        marks.append(float(self.seq.mu_exact(n)))
        p_all = np.array(marks)
        mu1 = p_all[0]
        idx = np.searchsorted(p_all, mu, side="right")
        p = p_all[np.maximum(idx - 1, 0)]
        d = mu - p
        E = lambda x: np.exp(np.log(np.maximum(x, 1.0)) ** 0.25)
        out = np.where(d <= 2, mu * mu, 0.0)
        up = d < 1
        out = np.where(up, E(p) + ((p + 1) ** 2 - E(p)) * d, out)
        down = (d > 2) & (d < 3)
        out = np.where(down, (p + 2) ** 2 + (E(p + 3) - (p + 2) ** 2) * (d - 2), out)
        out = np.where(d >= 3, E(mu), out)
        return np.where(mu <= mu1 + 1, mu * (mu1 + 1), out)

    def value(self, mu) -> float:
        _check_nonnegative(mu)
        if mu == 0:
            return 0.0
        v = self._segment_value_exact(as_fraction(mu))
        out = float(v)
        if math.isinf(out):
            raise OverflowError("omega value overflows float; use log_value")
        return out

    def _log_value_mp(self, log_mu: float) -> float:
        """Treat ``log_mu`` as exact and locate it with enough digits to resolve unit zones."""
        dps = int(abs(log_mu) / math.log(10)) + 40
        with mpmath.workdps(dps):
            mu = mpmath.exp(mpmath.mpf(log_mu))
            mu1 = self.seq.mu_exact(1)
            if mu <= mu1 + 1:
                return float(mpmath.log(mu * (mu1 + 1)))
            n = self._index_log(log_mu)
            # the float bisection can be off by one right at a joint
            while n >= 1 and mpmath.mpf(self.seq.mu_exact(n)) > mu:
                n -= 1
            while mpmath.mpf(self.seq.mu_exact(n + 1)) <= mu:
                n += 1
            p = mpmath.mpf(self.seq.mu_exact(n))
            d = mu - p
            E = lambda m: mpmath.exp(mpmath.log(m) ** 0.25)
            if d < 1:
                w0 = E(p)
                val = w0 + ((p + 1) ** 2 - w0) * d
            elif d <= 2:
                val = mu * mu
            elif d < 3:
                w0, w1 = (p + 2) ** 2, E(p + 3)
                val = w0 + (w1 - w0) * (d - 2)
            else:
                val = E(mu)
            return float(mpmath.log(val))

    def _guard(self, log_mu: float) -> float:
        return 64 * _EPS * max(1.0, abs(log_mu))

    def log_value(self, log_mu: float) -> LogScalar:
        if log_mu == -math.inf:
            return LogScalar.zero()
        n = self._index_log(log_mu)
        if n >= 1:
            L_n = self.seq.log_mu_value(n)
            L_next = self.seq.log_mu_value(n + 1)
            g = self._guard(log_mu)
            # exp((log mu)^(1/4)) segment, safely away from both joints
            if log_mu - L_n > math.log1p(3.0 / math.exp(min(L_n, 700.0))) + g and L_next - log_mu > g:
                return LogScalar(1, _explog(log_mu))
        if log_mu < 700.0 and (n == 0 or self.seq.log_mu_value(max(n, 1)) < 40 * math.log(2)):
            v = self._segment_value_exact(Fraction(math.exp(log_mu)))
            return LogScalar(1, exact_log(v))
        return LogScalar(1, self._log_value_mp(log_mu))

    def log_value_array(self, log_mu):
        L = np.asarray(log_mu, dtype=float)
        flat = L.ravel()
        out = np.empty_like(flat)
        n_top = self._index_log(float(np.max(flat))) + 2 if flat.size else 2
        logmu = np.array([self.seq.log_mu_value(n) for n in range(1, n_top + 1)])
        idx = np.searchsorted(logmu, flat, side="right")  # = n, count of mu_k <= mu
        safe = idx >= 1
        n_safe = np.where(safe, idx, 1)
        L_n = logmu[n_safe - 1]
        L_next = logmu[np.minimum(n_safe, len(logmu) - 1)]
        guard = 64 * _EPS * np.maximum(1.0, np.abs(flat))
        zone = np.log1p(3.0 / np.exp(np.minimum(L_n, 700.0)))
        in_exp = safe & (flat - L_n > zone + guard) & (L_next - flat > guard)
        out[in_exp] = np.abs(flat[in_exp]) ** 0.25
        for k in np.nonzero(~in_exp)[0]:
            out[k] = self.log_value(float(flat[k])).log_mag
        return out.reshape(L.shape)

    def breakpoints(self, lo, hi) -> list[Fraction]:
        lo, hi = as_fraction(lo), as_fraction(hi)
        pts = [Fraction(self.seq.mu_exact(1) + 1)]
        n = 1
        while True:
            p = self.seq.mu_exact(n)
            cand = [p + 2, p + 3, self.seq.mu_exact(n + 1), self.seq.mu_exact(n + 1) + 1]
            pts.extend(Fraction(c) for c in cand)
            if p > hi or n >= self.seq.n_max - 1:
                break
            n += 1
        return sorted({p for p in pts if lo < p < hi})

    def segments(self, lo, hi):
        """Yield (a, b, kind) covering [lo, hi]; kind in {ramp0, square, ramp, exp}."""
        lo, hi = as_fraction(lo), as_fraction(hi)
        cuts = [lo, *self.breakpoints(lo, hi), hi]
        for a, b in zip(cuts, cuts[1:]):
            yield a, b, self._kind((a + b) / 2)

    def _kind(self, mu: Fraction) -> str:
        mu1 = self.seq.mu_exact(1)
        if mu <= mu1 + 1:
            return "ramp0"
        p = self.seq.mu_exact(self._index_exact(mu))
        d = mu - p
        if d < 1 or 2 < d < 3:
            return "ramp"
        if d <= 2:
            return "square"
        return "exp"

    def integral_over(self, lo, hi) -> tuple[float, float]:
        """Integral of omega(mu)/mu^2 over [lo, hi], lo >= 1, with an absolute error bound.

        mu^2 segments contribute their length exactly, ramps use the closed
        form alpha (1/a - 1/b) + beta log(b/a) at high precision, and
        exp-segments are integrated by quadrature in s = log mu.
        """
        lo, hi = as_fraction(lo), as_fraction(hi)
        if lo < 1 or not lo < hi:
            raise ValueError("need 1 <= lo < hi")
        total = 0.0
        err = 0.0
        for a, b, kind in self.segments(lo, hi):
            if kind == "square":
                total += float(b - a)
            elif kind in ("ramp", "ramp0"):
                total += self._ramp_integral(a, b)
                err += 1e-15 * abs(total)
            else:
                sa, sb = exact_log(a), exact_log(b)
                val, e = integrate.quad(lambda s: math.exp(s ** 0.25 - s), sa, sb,
                                        epsabs=1e-14, epsrel=1e-12, limit=200)
                total += val
                err += e
        return total, err

    def _ramp_integral(self, a: Fraction, b: Fraction) -> float:
        digits = max(len(str(b.numerator)) - len(str(b.denominator)), 1)
        with mpmath.workdps(2 * digits + 40):
            A = mpmath.mpf(a.numerator) / a.denominator
            B = mpmath.mpf(b.numerator) / b.denominator
            wa = self._mp_value(a)
            wb = self._mp_value(b)
            beta = (wb - wa) / (B - A)
            alpha = wa - beta * A
            return float(alpha * (1 / A - 1 / B) + beta * mpmath.log(B / A))

    def _mp_value(self, mu: Fraction):
        v = self._segment_value_exact(mu)
        if isinstance(v, Fraction):
            return mpmath.mpf(v.numerator) / v.denominator
        return mpmath.mpf(v)

    def to_config(self) -> dict:
        return dict(family="counterexample", sequence=self.seq.to_config())


def weight_from_config(cfg: dict) -> Weight:
    """Build a weight from ``{"family": ..., params}``."""
    cfg = dict(cfg)
    family = cfg.pop("family")
    if family == "power":
        return PowerLaw(theta=float(Fraction(str(cfg["theta"]))), scale=float(cfg.get("scale", 1.0)))
    if family == "linear":
        return Linear(float(cfg.get("slope", 1.0)))
    if family == "table":
        return PiecewiseTable(tuple((Fraction(str(m)), Fraction(str(w))) for m, w in cfg["nodes"]))
    if family == "counterexample":
        seq = cfg.get("sequence", "standard")
        return CounterexampleOmega(SequencePair.from_config(seq))
    raise ValueError(f"unknown weight family {family!r}")


def omega_eval(w: Weight, mu) -> float:
    return w.value(mu)


def omega_eval_log(w: Weight, log_mu: float) -> LogScalar:
    return w.log_value(log_mu)


def integral_condition_partial(w: Weight, mu_lo, mu_hi) -> tuple[float, float]:
    """Integral of omega(mu)/mu^2 over [mu_lo, mu_hi] and an absolute error bound."""
    return w.integral_over(mu_lo, mu_hi)


def growth_check(w: Weight, theta: float, log_mu_grid) -> dict:
    """Track log omega(mu) - theta * log log mu along an increasing grid of log mu."""
    grid = [float(g) for g in log_mu_grid]
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise ValueError("grid must be increasing")
    if grid[0] <= 0:
        raise ValueError("grid must have log mu > 0")
    vals = [w.log_value(L).log_mag - theta * math.log(L) for L in grid]
    steps = [b - a for a, b in zip(vals, vals[1:])]
    return dict(
        theta=theta,
        log_mu=grid,
        values=vals,
        increasing=all(s > 0 for s in steps),
        # growing steps are taken as evidence that the sequence is unbounded
        accelerating=all(b >= a for a, b in zip(steps, steps[1:])),
    )
