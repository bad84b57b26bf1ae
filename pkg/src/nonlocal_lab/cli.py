"""Command-line runner for the experiments, writing JSON reports and CSV traces.

Exit codes: 0 when every check passes, 1 when some check fails, 2 on usage,
configuration or resource-cap errors.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
import time
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import __version__
from .engine import QuadratureConfig, classify, counterexample_partial_sum, geometric_schedule
from .intervals import ResourceCapError
from .levelset import (PreconditionError, gamma_estimate, gamma_lower_bound_check, loc_vs_glob_check,
                       olimpico_check, random_unit_slope_function)
from .piecewise import affine_function, heaviside, quotient_bounds_check, step_function, toy_fold
from .weights import (CounterexampleOmega, SequencePair, check_sequence_conditions, growth_check,
                      weight_from_config)

SCHEMA_VERSION = 1
EXPERIMENTS = ("counterexample", "heaviside", "locvsglob", "gamma", "olimpico")
HEAVISIDE_TARGET_TOL = 1e-4
LOG_SLOPE_TOL = 0.05

log = logging.getLogger("nonlocal_lab")

DEFAULTS = {
    "counterexample": dict(jmax=12, jmax_cap=12, sequence="standard", quotient_max_j=8,
                           quotient_samples=10_000,
                           growth=[dict(theta=1, log_mu=[1e2, 1e4, 1e6]),
                                   dict(theta=4, log_mu=[1e6, 1e8, 1e10])]),
    "heaviside": dict(theta_list=[0.5, 1.0], include_counterexample=True, eps_k=[6, 20]),
    "locvsglob": dict(ell_list=[0.1, 0.25, 0.5, 0.9], randomized_count=20, pieces=3, band_k=[8, 20]),
    "gamma": dict(u_preset="heaviside", mu_list=[10, 50, 100], J=None, delta="1/1000",
                  weight=dict(family="power", theta=0.5)),
    "olimpico": dict(count=100_000, m_max=10),
}
GAMMA_PRESETS = {
    # fixture, default J
    "heaviside": (lambda: heaviside(-1, 1, 0, Fraction(-1, 2), Fraction(1, 2)), Fraction(2, 5)),
    "staircase": (lambda: step_function([0, Fraction(1, 3), Fraction(2, 3), 1], [-1, 0, 1]), Fraction(4, 5)),
    "constant": (lambda: step_function([0, 1], [1]), None),
}


class UsageError(Exception):
    pass


# ---------------------------------------------------------------------------
# config
# ---------------------------------------------------------------------------

def load_config(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        cfg = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from exc
    version = cfg.get("schema_version")
    if version != SCHEMA_VERSION:
        raise UsageError(f"config schema_version must be {SCHEMA_VERSION}, got {version!r}")
    return cfg


def resolve(experiment: str, cfg: dict, args) -> dict:
    """Merge defaults, config file and command-line flags into one serializable config."""
    if cfg.get("experiment", experiment) != experiment:
        raise UsageError(f"config is for {cfg['experiment']!r}, not {experiment!r}")
    params = dict(DEFAULTS[experiment])
    unknown = set(cfg.get("params", {})) - set(params)
    if unknown:
        raise UsageError(f"unknown parameters for {experiment}: {sorted(unknown)}")
    params.update(cfg.get("params", {}))
    if experiment == "counterexample" and args.jmax is not None:
        params["jmax"] = args.jmax
    quad = dict(cfg.get("quadrature", {}))
    if args.threads is not None:
        quad["threads"] = args.threads
    output = dict(cfg.get("output", {}))
    if args.out is not None:
        output["dir"] = args.out
    if args.format is not None:
        output["format"] = args.format
    output.setdefault("dir", "reports")
    output.setdefault("format", "both")
    seed = args.seed if args.seed is not None else int(cfg.get("seed", 0))
    return dict(schema_version=SCHEMA_VERSION, experiment=experiment, seed=seed,
                params=params, quadrature=quad, output=output)


def _quad_config(resolved: dict) -> QuadratureConfig:
    try:
        return QuadratureConfig(**resolved["quadrature"])
    except (TypeError, ValueError) as exc:
        raise UsageError(f"bad quadrature config: {exc}") from exc


# ---------------------------------------------------------------------------
# experiments; each returns (report, csv_header, csv_rows)
# ---------------------------------------------------------------------------

def run_counterexample(resolved: dict):
    p = resolved["params"]
    J = int(p["jmax"])
    if not 2 <= J <= int(p["jmax_cap"]):
        raise UsageError(f"jmax must lie in [2, {p['jmax_cap']}], got {J}")
    seq = SequencePair.from_config(p["sequence"])
    cfg = _quad_config(resolved)
    failures = []

    cond = check_sequence_conditions(seq, J)
    bad_rows = [r for r in cond["rows"] if not (r["mu_growth"] and r["k_step"])]
    failures += [f"sequence condition fails at n={r['n']} (mu_growth={r['mu_growth']}, k_step={r['k_step']})"
                 for r in bad_rows]

    qmax = min(J, int(p["quotient_max_j"]), seq.exact_cap)
    quotient = []
    for j in range(2, qmax + 1):
        for i in range(1, j):
            q = quotient_bounds_check(seq, i, j, int(p["quotient_samples"]), seed=resolved["seed"] + 1000 * i + j)
            quotient.append(dict(i=i, j=j, pairs_checked=q["pairs_checked"], violations=q["violations"],
                                 lower_margin=q["lower_margin"], upper_margin=q["upper_margin"], ok=q["ok"]))
            if not q["ok"]:
                failures.append(f"quotient bounds violated on A_{i} x A_{j} ({q['violations']} pairs)")

    partial = counterexample_partial_sum(seq, CounterexampleOmega(seq), J, cfg)
    for key in ("monotone", "dominated", "cells_within_bound"):
        if not partial[key]:
            failures.append(f"partial sums: {key} is false")

    w = CounterexampleOmega(seq)
    growth = [growth_check(w, g["theta"], g["log_mu"]) for g in p["growth"]]
    failures += [f"growth check not increasing for theta={g['theta']}" for g in growth if not g["increasing"]]

    rows = partial["rows"]
    report = dict(
        sequence=seq.to_config(),
        conditions=dict(all_hold=cond["all_hold"], rows=cond["rows"], partial_sums=cond["partial_sums"],
                        tail_bound=cond["tail_bound"]),
        quotient_bounds=quotient,
        partial_sums=dict(rows=rows, cells=partial["cells"], monotone=partial["monotone"],
                          dominated=partial["dominated"], cells_within_bound=partial["cells_within_bound"],
                          same_set_contribution=partial["same_set_contribution"],
                          cells_evaluated=partial["cells_evaluated"], wall_time_ms=partial["wall_time_ms"]),
        growth=growth,
        trace=rows,
        margins=[dict(j=r["j"], margin=r["B_j"] + r["tail_bound"] - r["S_j"]) for r in rows],
        failures=failures,
    )
    csv_rows = [[r["j"], r["S_j"], r["B_j"], r["tail_bound"]] for r in rows]
    return report, ["j", "S_j", "B_j", "tail_bound"], csv_rows


def heaviside_power_value(theta: float) -> float:
    """2 * integral of min(t, 2 - t) t**(-theta - 1) over (0, 2), finite for theta < 1."""
    if theta >= 1:
        return math.inf
    near = 1 / (1 - theta)
    far = 2 * (1 - 2 ** -theta) / theta - (2 ** (1 - theta) - 1) / (1 - theta)
    return 2 * (near + far)


def run_heaviside(resolved: dict):
    p = resolved["params"]
    cfg = _quad_config(resolved)
    u = heaviside()
    eps = geometric_schedule(*p["eps_k"])
    cases = [(f"power theta={float(t):g}", dict(family="power", theta=float(Fraction(str(t))))) for t in p["theta_list"]]
    if p["include_counterexample"]:
        cases.append(("counterexample", dict(family="counterexample", sequence="standard")))
    table, failures, csv_rows = [], [], []
    for label, wcfg in cases:
        res = classify(u, weight_from_config(wcfg), None, eps, cfg)
        row = dict(label=label, weight=wcfg, **res.to_dict())
        if wcfg["family"] == "power":
            theta = wcfg["theta"]
            if theta < 1:
                target = heaviside_power_value(theta)
                row["expected"] = dict(kind="finite", value=target)
                ok = res.kind == "finite" and abs(res.value - target) <= HEAVISIDE_TARGET_TOL
            else:
                row["expected"] = dict(kind="divergent")
                ok = res.kind == "divergent"
                if theta == 1:
                    row["expected"]["slope"] = 2.0
                    ok = ok and res.rate_model == "logarithmic" and abs(res.slope - 2) <= 2 * LOG_SLOPE_TOL
        else:
            row["expected"] = dict(kind="divergent")
            ok = res.kind == "divergent"
        row["passed"] = bool(ok)
        if not ok:
            failures.append(f"{label}: got {res.kind} (value={res.value}, slope={res.slope})")
        table.append(row)
        csv_rows += [[label, e, v, row["expected"].get("value", "")] for e, v in res.epsilon_trace]
    report = dict(table=table, trace=[dict(label=r["label"], epsilon_trace=r["epsilon_trace"]) for r in table],
                  margins=[dict(label=r["label"], kind=r["kind"], value=r["value"], slope=r["slope"]) for r in table],
                  failures=failures)
    return report, ["fixture", "delta_or_mu", "value", "bound"], csv_rows


def run_locvsglob(resolved: dict):
    p = resolved["params"]
    schedule = [Fraction(1, 2**k) for k in range(p["band_k"][0], p["band_k"][1] + 1)]
    fixtures = [(f"toy ell={float(Fraction(str(l))):g}", toy_fold(Fraction(str(l))), Fraction(str(l)))
                for l in p["ell_list"]]
    fixtures.append(("injective identity", affine_function([0, 2], [1], [0]), None))
    rng = np.random.default_rng(resolved["seed"])
    for k in range(int(p["randomized_count"])):
        fixtures.append((f"random #{k}", random_unit_slope_function(rng, int(p["pieces"])), None))
    results, failures, csv_rows = [], [], []
    for label, phi, ell in fixtures:
        r = loc_vs_glob_check(phi, None, schedule)
        ok = r["passed"]
        if ell is not None:
            r["equality_gap"] = abs(r["lhs"] - float(ell)) / float(ell)
            ok = ok and r["equality_gap"] <= 0.02
        r.update(label=label, fixture=phi.to_dict(), passed=bool(ok))
        if not ok:
            failures.append(f"{label}: lhs={r['lhs']:.6g} rhs={r['rhs']:.6g}")
        results.append(r)
        csv_rows += [[label, t["delta"], t["value"], r["rhs"]] for t in r["trace"]]
    report = dict(fixtures=results,
                  trace=[dict(label=r["label"], trace=r["trace"]) for r in results],
                  margins=[dict(label=r["label"], margin=r["margin"]) for r in results],
                  failures=failures)
    return report, ["fixture", "delta_or_mu", "value", "bound"], csv_rows


def run_gamma(resolved: dict):
    p = resolved["params"]
    try:
        make, default_J = GAMMA_PRESETS[p["u_preset"]]
    except KeyError:
        raise UsageError(f"unknown u_preset {p['u_preset']!r}; choose from {sorted(GAMMA_PRESETS)}") from None
    u = make()
    w = weight_from_config(p["weight"])
    delta = Fraction(str(p["delta"]))
    mus = [Fraction(str(m)) for m in p["mu_list"]]
    failures = []
    if default_J is None:
        rows = [gamma_estimate(u, u.domain, w, mu, delta) for mu in mus]
        failures += [f"mu={r['mu']:g}: nonzero estimate {r['value']}" for r in rows if r["value"] != 0]
        report = dict(u=u.to_dict(), rows=rows, trace=rows, margins=[dict(mu=r["mu"], value=r["value"]) for r in rows],
                      failures=failures, note="constant u: the band region is empty")
        return report, ["delta_or_mu", "value", "bound"], [[r["mu"], r["value"], 0.0] for r in rows]
    J = Fraction(str(p["J"])) if p["J"] is not None else default_J
    try:
        res = gamma_lower_bound_check(u, u.domain, w, mus, J, delta=delta)
    except PreconditionError as exc:
        raise UsageError(str(exc)) from exc
    failures += [f"mu={r['mu']:g}: gamma lower {r['gamma_lower']:.6g} < bound {r['bound']:.6g}"
                 for r in res["rows"] if not r["skipped"] and not r["passed"]]
    if not any(not r["skipped"] for r in res["rows"]):
        failures.append("every mu was skipped (mu <= mu_0)")
    report = dict(u=u.to_dict(), weight=p["weight"], **res, trace=res["rows"],
                  margins=[dict(mu=r["mu"], margin=r.get("margin")) for r in res["rows"]], failures=failures)
    csv_rows = [[r["mu"], r.get("gamma_lower", ""), r.get("bound", "")] for r in res["rows"]]
    return report, ["delta_or_mu", "value", "bound"], csv_rows


def run_olimpico(resolved: dict):
    p = resolved["params"]
    count, m_max = int(p["count"]), int(p["m_max"])
    if count < 1 or m_max < 2:
        raise UsageError("count must be >= 1 and m_max >= 2")
    rng = np.random.default_rng(resolved["seed"])
    margins, sizes = [], []
    while len(margins) < count:
        m = int(rng.integers(2, m_max + 1))
        r = rng.random(m)
        if r.sum() < 1:
            continue
        margins.append(olimpico_check([float(v) for v in r]))
        sizes.append(m)
    worst = int(np.argmin([float(v) for v in margins]))
    equality = [olimpico_check([1.0, float(s)]) for s in np.linspace(0, 1, 11)]
    try:
        olimpico_check([0.2, 0.3])
        rejected = False
    except PreconditionError:
        rejected = True
    failures = []
    if margins[worst] < 0:
        failures.append(f"negative margin {margins[worst]} for a vector of size {sizes[worst]}")
    if any(e != 0 for e in equality):
        failures.append("equality family (1, s) has a nonzero margin")
    if not rejected:
        failures.append("vector with sum below 1 was not rejected")
    hist = {m: sizes.count(m) for m in sorted(set(sizes))}
    report = dict(count=count, m_max=m_max, min_margin=float(margins[worst]), min_margin_exact=margins[worst],
                  sizes=hist, equality_margins=equality, below_one_rejected=rejected,
                  trace=[dict(m=m, min_margin=min(float(v) for v, s in zip(margins, sizes) if s == m)) for m in hist],
                  margins=dict(min=float(margins[worst])), failures=failures)
    csv_rows = [[t["m"], t["min_margin"]] for t in report["trace"]]
    return report, ["m", "min_margin"], csv_rows


RUNNERS = dict(counterexample=run_counterexample, heaviside=run_heaviside, locvsglob=run_locvsglob,
               gamma=run_gamma, olimpico=run_olimpico)


# ---------------------------------------------------------------------------
# output
# ---------------------------------------------------------------------------

def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, Fraction):
        return str(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    if isinstance(obj, int) and abs(obj) > 2**53:
        return str(obj)
    return obj


def run_experiment(experiment: str, resolved: dict) -> dict:
    t0 = time.perf_counter()
    body, header, rows = RUNNERS[experiment](resolved)
    report = dict(experiment=experiment, version=__version__, inputs=resolved,
                  **{"pass": not body["failures"]}, **body,
                  wall_time_ms=(time.perf_counter() - t0) * 1e3)
    report = _jsonable(report)
    report["_csv"] = (header, rows)
    return report


def write_outputs(report: dict, resolved: dict) -> list[Path]:
    out = Path(resolved["output"]["dir"])
    out.mkdir(parents=True, exist_ok=True)
    fmt = resolved["output"]["format"]
    header, rows = report.pop("_csv")
    written = []
    if fmt in ("json", "both"):
        path = out / f"{report['experiment']}.json"
        path.write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
        written.append(path)
    if fmt in ("csv", "both"):
        path = out / f"{report['experiment']}.csv"
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            writer.writerows(_jsonable(rows))
        written.append(path)
    return written


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="JSON config with schema_version")
    common.add_argument("--seed", type=int, help="random seed (default 0)")
    common.add_argument("--jmax", type=int, help="deepest Cantor level (counterexample only)")
    common.add_argument("--out", metavar="DIR", help="report directory (default ./reports)")
    common.add_argument("--format", choices=("json", "csv", "both"), help="report format (default both)")
    common.add_argument("--threads", type=int, help="worker threads for cell quadrature")
    common.add_argument("-v", "--verbose", action="store_true")
    parser = argparse.ArgumentParser(prog="nonlocal-lab", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="experiment", required=True)
    helps = dict(counterexample="sequence conditions, quotient bounds and partial sums of the Cantor construction",
                 heaviside="finite/divergent classification for the Heaviside step",
                 locvsglob="band-integral surrogate versus measure loss of the image",
                 gamma="lower bound for the band density gamma(mu)",
                 olimpico="random check of sum_{i<j} r_i r_j >= S - 1")
    for name in EXPERIMENTS:
        sub.add_parser(name, parents=[common], help=helps[name])
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        resolved = resolve(args.experiment, load_config(args.config), args)
        report = run_experiment(args.experiment, resolved)
        paths = write_outputs(report, resolved)
    except (UsageError, ResourceCapError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    status = "PASS" if report["pass"] else "FAIL"
    print(f"{args.experiment}: {status} ({report['wall_time_ms'] / 1e3:.2f} s)")
    for line in report["failures"]:
        print(f"  - {line}")
    for path in paths:
        log.info("wrote %s", path)
    return 0 if report["pass"] else 1


if __name__ == "__main__":
    sys.exit(main())
