"""Evaluation of the double integral of omega(|u(y)-u(x)|/|y-x|) / |y-x| over a 1-D domain.

Internally every sum runs over ordered cells x < y; public values carry the
factor 2 of the full (x, y) square.  Constant x constant cells are reduced to a
one-dimensional integral against the covariogram of the two intervals and
integrated in s = log t.
"""

from __future__ import annotations

import json
import math
import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from fractions import Fraction

import numpy as np
from scipy import integrate

from .intervals import (DEFAULT_DEPTH_CAP, Interval, ResourceCapError, as_fraction,
                        cantor_left_numerators, cantor_removed, covariogram)
from .logscalar import exact_log
from .piecewise import Affine, Constant, PiecewiseFunction, PieceLaw
from .weights import CounterexampleOmega, SequencePair, Weight, series_tail_bound


@dataclass(frozen=True)
class QuadratureConfig:
    rel_tol: float = 1e-8
    abs_tol: float = 1e-12
    max_subdivisions: int = 200
    monte_carlo_samples: int = 10_000_000
    gauss_order: int = 12
    threads: int = 1

    def __post_init__(self):
        if self.rel_tol <= 0 or self.abs_tol <= 0:
            raise ValueError("tolerances must be positive")
        if self.max_subdivisions <= 0 or self.monte_carlo_samples <= 0 or self.gauss_order < 2:
            raise ValueError("caps must be positive")


class NonConvergenceError(RuntimeError):
    """Quadrature did not converge; ``lower``/``upper`` bracket what was seen."""

    def __init__(self, message: str, lower: float, upper: float):
        super().__init__(f"{message} (bracket [{lower:.6g}, {upper:.6g}])")
        self.lower = lower
        self.upper = upper


@dataclass
class FunctionalResult:
    kind: str                      # "finite" | "divergent" | "inconclusive"
    value: float | None = None
    error_bound: float | None = None
    rate_model: str | None = None  # "logarithmic" | "power"
    slope: float | None = None
    epsilon_trace: list[tuple[float, float]] = field(default_factory=list)
    cells_evaluated: int = 0
    wall_time_ms: float = 0.0
    note: str = ""

    def to_dict(self) -> dict:
        d = asdict(self)
        d["epsilon_trace"] = [list(p) for p in self.epsilon_trace]
        return d

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)


# ---------------------------------------------------------------------------
# single cells
# ---------------------------------------------------------------------------

def _quad(f, a, b, cfg: QuadratureConfig) -> tuple[float, float]:
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        val, err, info, *rest = integrate.quad(f, a, b, epsabs=cfg.abs_tol, epsrel=cfg.rel_tol,
                                               limit=cfg.max_subdivisions, full_output=1)
    # a trailing message means quad flagged a problem; accept only harmless round-off
    flagged = bool(rest) and not (math.isfinite(err) and err <= 100 * max(cfg.abs_tol, cfg.rel_tol * abs(val)))
    if flagged or not math.isfinite(val):
        raise NonConvergenceError(f"quadrature on [{a}, {b}] did not converge",
                                  val - abs(err), val + abs(err) if math.isfinite(err) else math.inf)
    return val, err


def _integrate_split(f, s_lo: float, s_hi: float, points, cfg) -> tuple[float, float]:
    cuts = [s_lo, *sorted(p for p in points if s_lo < p < s_hi), s_hi]
    total = err = 0.0
    for a, b in zip(cuts, cuts[1:]):
        v, e = _quad(f, a, b, cfg)
        total += v
        err += e
    return total, err


def _weight_on_quotient(w: Weight, log_delta: float):
    def omega_at(s: float) -> float:
        return math.exp(w.log_value(log_delta - s).log_mag)
    return omega_at


def constant_cell(I: Interval, J: Interval, delta, w: Weight, cfg: QuadratureConfig,
                  eps: float = 0.0) -> tuple[float, float]:
    """Integral over x in I, y in J (J right of I, y - x >= eps) of omega(delta/(y-x))/(y-x).

    Reduced to the sum over linear pieces of the covariogram of
    int omega(delta e^{-s}) lambda(e^s) ds.
    """
    delta = abs(delta)
    if delta == 0:
        return 0.0, 0.0
    lam = covariogram(I, J)
    log_delta = exact_log(delta)
    omega_at = _weight_on_quotient(w, log_delta)
    total = err = 0.0
    for t0, t1, alpha, beta in lam.linear_pieces():
        lo = max(float(t0), eps)
        hi = float(t1)
        if lo >= hi:
            continue
        a, b = float(alpha), float(beta)
        f = lambda s, a=a, b=b: omega_at(s) * (a + b * math.exp(s))
        s_lo = math.log(lo) if lo > 0 else -math.inf
        s_hi = math.log(hi)
        # weight breakpoints at quotient mu sit at s = log(delta) - log(mu)
        if lo > 0:
            mu_lo, mu_hi = as_fraction(delta) / as_fraction(hi), as_fraction(delta) / as_fraction(lo)
            pts = [log_delta - exact_log(p) for p in w.breakpoints(mu_lo, mu_hi)]
        else:
            pts = []
        v, e = _integrate_split(f, s_lo, s_hi, pts, cfg)
        total += v
        err += e
    return total, err


def same_piece_contribution(piece: tuple[Interval, PieceLaw], w: Weight, eps: float = 0.0) -> float:
    """Ordered x < y inside one piece: 0 for constants, omega(|m|) * int (L - t)/t dt for slope m."""
    iv, law = piece
    m = law.slope
    if m == 0:
        return 0.0
    om = w.value(abs(as_fraction(m)) if not isinstance(m, float) else abs(m))
    if om == 0:
        return 0.0
    L = float(iv.length)
    if eps <= 0:
        return math.inf
    if eps >= L:
        return 0.0
    return om * (L * math.log(L / eps) - (L - eps))


def _affine_cell(px, py, w: Weight, cfg: QuadratureConfig, eps: float) -> tuple[float, float]:
    (I, sx), (J, sy) = px, py
    a0, a1, b0, b1 = float(I.lo), float(I.hi), float(J.lo), float(J.hi)

    def f(y, x):
        t = y - x
        q = abs(float(sy.at(y)) - float(sx.at(x))) / t
        return w.value(q) / t

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        val, err = integrate.dblquad(f, a0, a1, lambda x: max(b0, x + eps), lambda x: b1,
                                     epsabs=cfg.abs_tol * 1e3, epsrel=cfg.rel_tol * 1e2)
    if not math.isfinite(val):
        raise NonConvergenceError("2-D quadrature did not converge", 0.0, math.inf)
    return val, err


def pair_contribution(piece_x, piece_y, w: Weight, cfg: QuadratureConfig | None = None,
                      eps: float = 0.0) -> float:
    """Ordered-cell integral for x in piece_x and y in piece_y (piece_y to the right)."""
    return _pair_contribution(piece_x, piece_y, w, cfg or QuadratureConfig(), eps)[0]


def _pair_contribution(px, py, w, cfg, eps) -> tuple[float, float]:
    (I, sx), (J, sy) = px, py
    if I.hi > J.lo:
        raise ValueError("pieces must be disjoint with the second to the right")
    if isinstance(sx, Constant) and isinstance(sy, Constant):
        return constant_cell(I, J, Fraction(sy.value) - Fraction(sx.value)
                             if not isinstance(sx.value, float) and not isinstance(sy.value, float)
                             else sy.value - sx.value, w, cfg, eps)
    return _affine_cell(px, py, w, cfg, eps)


# ---------------------------------------------------------------------------
# whole functions
# ---------------------------------------------------------------------------

def _cells(u: PiecewiseFunction, domain: Interval | None):
    pieces = u.restrict(domain) if domain is not None else list(u.pieces)
    return [(k, l, pieces[k], pieces[l]) for k in range(len(pieces)) for l in range(k, len(pieces))]


def _eval_cell(cell, w, cfg, eps) -> tuple[float, float]:
    k, l, pk, pl = cell
    if k == l:
        return same_piece_contribution(pk, w, eps), 0.0
    return _pair_contribution(pk, pl, w, cfg, eps)


def truncated_with_error(u: PiecewiseFunction, w: Weight, domain: Interval | None, eps: float,
                         cfg: QuadratureConfig | None = None) -> tuple[float, float, int]:
    """(F^eps, absolute error estimate, cells evaluated); F^eps counts both orders."""
    cfg = cfg or QuadratureConfig()
    cells = _cells(u, domain)
    if cfg.threads > 1:
        with ThreadPoolExecutor(cfg.threads) as pool:
            results = list(pool.map(lambda c: _eval_cell(c, w, cfg, eps), cells))
    else:
        results = [_eval_cell(c, w, cfg, eps) for c in cells]
    # fixed summation order (cell order) regardless of worker count
    total = math.fsum(v for v, _ in results)
    err = math.fsum(e for _, e in results)
    return 2 * total, 2 * err, len(cells)


def evaluate_truncated(u: PiecewiseFunction, w: Weight, domain: Interval | None, eps: float,
                       cfg: QuadratureConfig | None = None) -> float:
    if domain is not None and eps >= float(domain.length):
        raise ValueError("eps must be smaller than the domain length")
    return truncated_with_error(u, w, domain, eps, cfg)[0]


def evaluate_unordered(u: PiecewiseFunction, w: Weight, domain: Interval | None, eps: float,
                       cfg: QuadratureConfig | None = None) -> float:
    """Sum over all (x, y) with |y - x| >= eps, visiting both orders of every cell.

    Cells with x to the right of y are evaluated through the mirrored
    covariogram; diagonal cells as the full square.  Used to confirm the
    factor-2 convention of :func:`evaluate_truncated`.
    """
    cfg = cfg or QuadratureConfig()
    pieces = u.restrict(domain) if domain is not None else list(u.pieces)
    total = []
    for k, pk in enumerate(pieces):
        for l, pl in enumerate(pieces):
            if k == l:
                total.append(2 * same_piece_contribution(pk, w, eps))
            elif k < l:
                total.append(_pair_contribution(pk, pl, w, cfg, eps)[0])
            else:
                # x in pk lies right of y in pl; the integrand depends on |y - x| only
                total.append(_mirrored(pk, pl, w, cfg, eps))
    return math.fsum(total)


def _mirrored(px, py, w, cfg, eps) -> float:
    (I, sx), (J, sy) = px, py
    # reflect the line: x -> -x maps J left of I onto -J right of -I
    rI = Interval(-I.hi, -I.lo)
    rJ = Interval(-J.hi, -J.lo)
    rsx = _reflect(sx)
    rsy = _reflect(sy)
    return _pair_contribution((rI, rsx), (rJ, rsy), w, cfg, eps)[0]


def _reflect(law: PieceLaw) -> PieceLaw:
    if isinstance(law, Constant):
        return law
    return Affine(-law.slope, law.intercept)


def classify(u: PiecewiseFunction, w: Weight, domain: Interval | None, eps_schedule,
             cfg: QuadratureConfig | None = None, *, min_slope: float = 1e-3,
             decay_ratio: float = 0.9) -> FunctionalResult:
    """Classify F as finite or divergent from the trace eps -> F^eps.

    Slopes are increments of F^eps per unit of log(1/eps).  When the slopes
    on the tail of the schedule decay geometrically (ratio <= ``decay_ratio``)
    the value is extrapolated with Aitken's rule; otherwise a tail slope above
    max(10 rel_tol F, min_slope) is reported as divergence.
    """
    cfg = cfg or QuadratureConfig()
    t0 = time.perf_counter()
    eps = [float(e) for e in eps_schedule]
    if len(eps) < 4 or any(b >= a for a, b in zip(eps, eps[1:])):
        raise ValueError("schedule must be strictly decreasing with at least 4 points")
    trace, errs, cells = [], [], 0
    for e in eps:
        try:
            v, er, nc = truncated_with_error(u, w, domain, e, cfg)
        except NonConvergenceError as exc:
            return FunctionalResult("inconclusive", epsilon_trace=trace, cells_evaluated=cells,
                                    wall_time_ms=_ms(t0), note=str(exc))
        trace.append((e, v))
        errs.append(er)
        cells += nc
    F = np.array([v for _, v in trace])
    logs = np.log(1 / np.array(eps))
    d = np.diff(F)
    ell = np.diff(logs)
    slopes = d / ell
    tol = 10 * max(errs) + 1e-12 * max(1.0, abs(F[-1]))
    if np.any(d < -tol):
        return FunctionalResult("inconclusive", epsilon_trace=trace, cells_evaluated=cells,
                                wall_time_ms=_ms(t0), note="trace is not monotone")
    threshold = max(10 * cfg.rel_tol * abs(F[-1]), min_slope)
    n_tail = max(3, len(slopes) // 2)
    tail = slopes[-n_tail:]
    tail_logs = logs[-(n_tail + 1):]
    tail_F = F[-(n_tail + 1):]
    fit_slope = float(np.polyfit(tail_logs, tail_F, 1)[0])

    if np.all(tail <= threshold * 1e-6) or np.all(np.abs(tail) <= 1e-300):
        return FunctionalResult("finite", float(F[-1]), float(tol), epsilon_trace=trace,
                                cells_evaluated=cells, wall_time_ms=_ms(t0))
    positive = np.all(tail > 0)
    ratios = tail[1:] / tail[:-1] if positive else np.array([np.inf])
    if positive and np.all(ratios <= decay_ratio):
        rho = float(d[-1] / d[-2])
        rho_prev = float(d[-2] / d[-3])
        value = float(F[-1] + d[-1] * rho / (1 - rho))
        alt = float(F[-1] + d[-1] * rho_prev / (1 - rho_prev))
        bound = abs(value - alt) + tol
        return FunctionalResult("finite", value, bound, epsilon_trace=trace, cells_evaluated=cells,
                                wall_time_ms=_ms(t0), slope=float(tail[-1]),
                                note="Aitken extrapolation of geometrically decaying increments")
    if np.all(tail <= threshold):
        return FunctionalResult("finite", float(F[-1]), float(tail[-1] / (1 - decay_ratio)),
                                epsilon_trace=trace, cells_evaluated=cells, wall_time_ms=_ms(t0),
                                slope=float(tail[-1]), note="tail slope below threshold")
    if fit_slope > threshold:
        if positive and np.all(ratios > 1.1):
            rate = float(np.mean(np.log(ratios) / ell[-len(ratios):]))
            return FunctionalResult("divergent", rate_model="power", slope=rate, epsilon_trace=trace,
                                    cells_evaluated=cells, wall_time_ms=_ms(t0))
        return FunctionalResult("divergent", rate_model="logarithmic", slope=fit_slope,
                                epsilon_trace=trace, cells_evaluated=cells, wall_time_ms=_ms(t0))
    return FunctionalResult("inconclusive", epsilon_trace=trace, cells_evaluated=cells,
                            wall_time_ms=_ms(t0), slope=fit_slope)


def _ms(t0: float) -> float:
    return (time.perf_counter() - t0) * 1e3


def geometric_schedule(k_lo: int = 6, k_hi: int = 20, base: float = 2.0) -> list[float]:
    return [base ** -k for k in range(k_lo, k_hi + 1)]


# ---------------------------------------------------------------------------
# the Cantor construction
# ---------------------------------------------------------------------------

def cantor_distance_profile(i: int, j: int, depth_cap: int = DEFAULT_DEPTH_CAP) -> np.ndarray:
    """Values V[m] of the summed covariogram of |y - x|, x in A_i, y in A_j, i < j.

    The sum of the tents of all interval pairs is piecewise linear on the
    grid t = m 3^-j; the covariogram at t = m 3^-j equals 3^-j * V[m].
    """
    if not 1 <= i < j:
        raise ValueError("need 1 <= i < j")
    P = cantor_left_numerators(i, depth_cap) * 3 ** (j - i)
    a = 3 ** (j - i)
    Q = cantor_left_numerators(j, depth_cap)
    right = Q[None, :] > P[:, None]
    gaps = np.where(right, Q[None, :] - (P[:, None] + a), P[:, None] - (Q[None, :] + 1)).ravel()
    size = 3**j + 3
    d2 = (np.bincount(gaps, minlength=size)
          - np.bincount(gaps + 1, minlength=size)
          - np.bincount(gaps + a, minlength=size)
          + np.bincount(gaps + a + 1, minlength=size))
    slope = np.cumsum(d2)
    V = np.concatenate([[0], np.cumsum(slope)])[:size]
    return V


def _gauss_cells(log_delta: float, V: np.ndarray, h: float, w: Weight, order: int) -> float:
    """Sum over grid cells [m h, (m+1) h] of int omega(delta e^-s) Lambda(e^s) ds."""
    m = np.nonzero((V[:-1] > 0) | (V[1:] > 0))[0]
    if len(m) and m[0] == 0:
        raise ValueError("profile touches t = 0; cells must be separated")
    x, wt = np.polynomial.legendre.leggauss(order)
    s0 = np.log(m * h)
    s1 = np.log((m + 1) * h)
    half = (s1 - s0) / 2
    S = s0[:, None] + half[:, None] * (x[None, :] + 1)
    t = np.exp(S)
    v0 = V[m].astype(float)[:, None]
    v1 = V[m + 1].astype(float)[:, None]
    lam = h * (v0 + (v1 - v0) * (t / h - m[:, None]))
    om = np.exp(w.log_value_array(log_delta - S))
    return float(np.sum(half[:, None] * wt[None, :] * om * lam))


def cantor_cell_contribution(seq: SequencePair, w: Weight, i: int, j: int,
                             cfg: QuadratureConfig | None = None) -> tuple[float, float]:
    """Integral over A_i x A_j of omega(|u(y)-u(x)|/|y-x|)/|y-x| and an error estimate."""
    cfg = cfg or QuadratureConfig()
    if i == j:
        return 0.0, 0.0
    i, j = min(i, j), max(i, j)
    V = cantor_distance_profile(i, j)
    h = 3.0 ** -j
    log_delta = exact_log(seq.k_exact(j) - seq.k_exact(i))
    hi = _gauss_cells(log_delta, V, h, w, cfg.gauss_order)
    lo = _gauss_cells(log_delta, V, h, w, max(2, cfg.gauss_order // 2))
    return hi, abs(hi - lo)


def cantor_cell_bound(seq: SequencePair, j: int) -> float:
    """exp((log mu_j)^(1/4)) * |A_j| * 2 log(3^j)."""
    return math.exp(seq.log_mu_value(j) ** 0.25) * 0.5 * (2 / 3) ** j * 2 * j * math.log(3)


def counterexample_partial_sum(seq: SequencePair, w: Weight | None, J_max: int,
                               cfg: QuadratureConfig | None = None, *,
                               depth_cap: int = DEFAULT_DEPTH_CAP) -> dict:
    """Partial sums S_J = 2 sum_{j<=J} sum_{i<j} cell(i, j) and the comparison bounds.

    B_J = 4 sum_{j<=J} j^2 (2/3)^j exp((log mu_j)^(1/4)); ``tail_bound`` bounds
    4 times the remainder of that series after J.
    """
    cfg = cfg or QuadratureConfig()
    if J_max > depth_cap:
        raise ResourceCapError(f"J_max {J_max} exceeds depth cap {depth_cap}")
    if J_max < 2:
        raise ValueError("J_max must be at least 2")
    w = w or CounterexampleOmega(seq)
    t0 = time.perf_counter()
    jobs = [(i, j) for j in range(2, J_max + 1) for i in range(1, j)]
    if cfg.threads > 1:
        with ThreadPoolExecutor(cfg.threads) as pool:
            vals = list(pool.map(lambda ij: cantor_cell_contribution(seq, w, *ij, cfg), jobs))
    else:
        vals = [cantor_cell_contribution(seq, w, i, j, cfg) for i, j in jobs]
    cells = {ij: v for ij, v in zip(jobs, vals)}

    rows = []
    S = 0.0
    B = 0.0
    err = 0.0
    for j in range(1, J_max + 1):
        B += 4 * seq.series_term(j)
        row_cells = [cells[(i, j)] for i in range(1, j)]
        S += 2 * math.fsum(v for v, _ in row_cells)
        err += 2 * math.fsum(e for _, e in row_cells)
        tail = 4 * series_tail_bound(seq, j, horizon=max(4000, 20 * J_max))["bound"]
        rows.append(dict(j=j, S_j=S, B_j=B, tail_bound=tail, error_estimate=err))
    cell_rows = []
    for (i, j), (v, e) in cells.items():
        bound = cantor_cell_bound(seq, j)
        cell_rows.append(dict(i=i, j=j, value=v, error_estimate=e, bound=bound, within_bound=v <= bound))
    # x and y in the same A_n: equal values, so the quotient and omega vanish
    same_set = []
    for n in range(1, min(J_max, 4) + 1):
        parts = cantor_removed(n).parts
        piece = (parts[0], Constant(seq.k_exact(n)))
        same_set.append(same_piece_contribution(piece, w))
        if len(parts) > 1:
            same_set.append(pair_contribution(piece, (parts[-1], Constant(seq.k_exact(n))), w, cfg))
    monotone = all(b["S_j"] >= a["S_j"] for a, b in zip(rows, rows[1:]))
    dominated = all(r["S_j"] <= r["B_j"] + r["tail_bound"] for r in rows)
    return dict(
        J_max=J_max,
        rows=rows,
        cells=cell_rows,
        monotone=monotone,
        dominated=dominated,
        cells_within_bound=all(c["within_bound"] for c in cell_rows),
        same_set_contribution=max(same_set),
        cells_evaluated=len(jobs),
        wall_time_ms=_ms(t0),
    )
