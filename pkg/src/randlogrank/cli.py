"""Command line entry point: ``randlogrank {test,simulate,oracle,moments}``.

Exit codes: 0 ok, 2 usage or input error, 3 undefined statistic (U = 0),
4 verification failure.
"""
from __future__ import annotations

import argparse
import csv
import datetime as _dt
import hashlib
import json
import math
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .diagnostics import compare, summarize, write_histogram_csv
from .io import InputError, read_dataset, read_population, read_scenario, resolve_input
from .logrank import logrank_statistic, stratified_logrank, two_sided_p_value
from .moments import (
    MechanismSpec,
    asymptotic_variance_approx,
    condition_report,
    exact_mean_U,
    exact_variance_L,
    population_condition_reports,
)
from .oracle import CHECKS, DEFAULT_CAP, EnumerationTooLarge, TOLERANCE, run_checks
from .simulation import PRESETS, preset, run_scenario
from .survival import build_event_grid, empirical_survival

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_UNDEFINED = 3
EXIT_VERIFY = 4

OUTPUT_DIR_ENV = "RANDLOGRANK_OUTPUT_DIR"


class UsageError(Exception):
    pass


def _digest(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _clean(obj):
    """JSON-safe copy: non-finite floats become null, numpy scalars become Python."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def _emit(args, command: str, payload: dict) -> None:
    doc = {"tool": "randlogrank", "tool_version": __version__, "command": command, **payload}
    if not args.no_timestamp:
        doc["created"] = _dt.datetime.now(_dt.timezone.utc).isoformat()
    text = json.dumps(_clean(doc), indent=2, sort_keys=True, allow_nan=False) + "\n"
    out = args.out
    if out is None and os.environ.get(OUTPUT_DIR_ENV):
        out = Path(os.environ[OUTPUT_DIR_ENV]) / f"{command}.json"
    if out is None:
        if args.json:
            sys.stdout.write(text)
        return
    Path(out).parent.mkdir(parents=True, exist_ok=True)
    Path(out).write_text(text)


def _components_dict(res) -> dict:
    c = res.components
    return {
        "times": c.times,
        "d1": c.d1,
        "m": c.m,
        "v": c.v,
        "n_at_risk": c.n_at_risk,
        "n1_at_risk": c.n1_at_risk,
        "d": c.d,
    }


def cmd_test(args) -> int:
    data = read_dataset(args.dataset)
    base = logrank_statistic(data)
    payload = {
        "input_sha256": _digest(args.dataset),
        "config": {"dataset": str(args.dataset), "stratified": args.stratified, "seed": args.seed},
        "n_units": len(data),
    }
    if args.stratified:
        res = stratified_logrank(data)
        payload["statistic_name"] = "SLR"
        payload["per_stratum"] = [{"stratum": s, "L": l, "U": u} for s, l, u in res.per_stratum]
    else:
        res = base
        payload["statistic_name"] = "LR"
    payload.update({"L": res.L, "U": res.U, "statistic": res.statistic, "p_value_asymptotic_two_sided": res.p_value})
    if args.components:
        payload["components"] = _components_dict(base)
    _emit(args, "test", payload)
    if res.statistic is None:
        print("statistic undefined: U = 0", file=sys.stderr)
        return EXIT_UNDEFINED
    print(f"{payload['statistic_name']} = {res.statistic!r}")
    print(f"p-value (asymptotic, two-sided) = {two_sided_p_value(res.statistic)!r}")
    return EXIT_OK


def _scenario(args):
    src = args.scenario
    overrides = {}
    for key in ("mode", "n", "reps", "seed"):
        v = getattr(args, key)
        if v is not None:
            overrides[key] = v
    if args.stat in ("slr", "both"):
        overrides["strata"] = True
    elif args.stat == "lr":
        overrides["strata"] = False
    try:
        if Path(src).exists():
            cfg = read_scenario(src)
            input_digest = _digest(src)
            return replace(cfg, **overrides), input_digest
        return preset(src, **overrides), None
    except KeyError:
        raise UsageError(f"unknown preset {src!r}; known presets: {', '.join(PRESETS)}") from None
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def cmd_simulate(args) -> int:
    cfg, input_digest = _scenario(args)
    if cfg.seed is None:
        raise UsageError("simulate needs --seed (or a seed key in the scenario file)")
    if args.threads < 1:
        raise UsageError("--threads must be >= 1")
    out = run_scenario(cfg, threads=args.threads)
    stat = args.stat or ("both" if cfg.strata else "lr")
    stats = {}
    if stat in ("lr", "both"):
        stats["lr"] = summarize(out.lr)
    if stat in ("slr", "both"):
        stats["slr"] = summarize(out.slr)
    payload = {
        "scenario": cfg.case,
        "mode": cfg.mode,
        "config": cfg.to_dict(),
        "input_sha256": input_digest,
        "seed_metadata": out.metadata(),
        "summaries": {k: v.to_dict() for k, v in stats.items()},
    }
    if "lr" in stats and "slr" in stats:
        payload["comparison_lr_vs_slr"] = compare(stats["lr"], stats["slr"])
    _emit(args, "simulate", payload)
    if args.samples:
        with open(args.samples, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["rep", "L", "U", "lr"] + (["slr"] if out.slr is not None else []))
            for i in range(cfg.reps):
                row = [i, repr(float(out.L[i])), repr(float(out.U[i])), repr(float(out.lr[i]))]
                if out.slr is not None:
                    row.append(repr(float(out.slr[i])))
                w.writerow(row)
    if args.histogram_csv:
        write_histogram_csv(stats["slr" if stat == "slr" else "lr"], args.histogram_csv)
    for name, s in stats.items():
        print(f"{name}: mean={s.mean:.4f} variance={s.variance:.4f} ks={s.ks:.4f} undefined={s.undefined_fraction:.4f}")
    return EXIT_OK


def cmd_oracle(args) -> int:
    pop = read_population(args.population)
    checks = CHECKS if args.checks == "all" else (args.checks,)
    try:
        reports = run_checks(pop, checks=checks, cap=args.cap)
    except EnumerationTooLarge as exc:
        raise UsageError(str(exc)) from None
    ok = all(r.passed for r in reports.values())
    payload = {
        "input_sha256": _digest(resolve_input(args.population)),
        "config": {"population": str(args.population), "checks": list(checks), "cap": args.cap},
        "n_units": pop.n,
        "tolerance": TOLERANCE,
        "checks": {k: r.to_dict() for k, r in reports.items()},
        "all_passed": ok,
    }
    _emit(args, "oracle", payload)
    for name, r in reports.items():
        print(f"{name}: max deviation {r.max_deviation:.3e} {'ok' if r.passed else 'FAIL'}")
    return EXIT_OK if ok else EXIT_VERIFY


def _moments_for(pop) -> dict:
    grid = build_event_grid(pop.potential_event_times)
    mech = MechanismSpec.from_population(pop)
    F = empirical_survival(grid, pop.n)
    return {
        "n": pop.n,
        "p1": mech.p1,
        "var_L_exact": exact_variance_L(grid, mech),
        "mean_U_exact": exact_mean_U(grid, mech),
        "var_L_approx": asymptotic_variance_approx(pop.n, F, mech),
        "sum_hazards": float(grid.hazard.sum()),
        "conditions": condition_report(grid, mech).to_dict(),
    }


def cmd_moments(args) -> int:
    pop = read_population(args.population)
    payload = {
        "input_sha256": _digest(resolve_input(args.population)),
        "config": {"population": str(args.population)},
    }
    if len(pop.labels) == 1:
        payload.update(_moments_for(pop))
        summary = payload
    else:
        per = {s: _moments_for(pop.stratum(s)) for s in pop.labels}
        payload["per_stratum"] = per
        payload["var_total_L_exact"] = math.fsum(v["var_L_exact"] for v in per.values())
        payload["condition3"] = {s: r.to_dict() for s, r in population_condition_reports(pop).items()}
        summary = {"var_L_exact": payload["var_total_L_exact"]}
    _emit(args, "moments", payload)
    print(f"Var(L) = E[U] = {summary['var_L_exact']!r}")
    if "var_L_approx" in summary:
        c = summary["conditions"]
        print(f"approximation = {summary['var_L_approx']!r}")
        print(f"d_tilde = {c['d_tilde']}, g_tilde = {c['g_tilde']!r}, criterion1 = {c['criterion1']!r}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", type=Path, help="write the JSON result here")
    common.add_argument("--seed", type=int, help="base seed (required by simulate)")
    common.add_argument("--no-timestamp", action="store_true", help="omit the 'created' field")
    common.add_argument("--json", action="store_true", help="print the JSON result to stdout when no --out is given")

    parser = argparse.ArgumentParser(prog="randlogrank", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("test", parents=[common], help="logrank or stratified logrank test on a CSV dataset")
    p.add_argument("dataset", type=Path)
    p.add_argument("--stratified", action="store_true")
    p.add_argument("--components", action="store_true", help="include per-time components")
    p.set_defaults(func=cmd_test)

    p = sub.add_parser("simulate", parents=[common], help="run a simulation scenario or preset")
    p.add_argument("scenario", help=f"scenario file or preset ({', '.join(PRESETS)})")
    p.add_argument("--mode", help="superpopulation | finite | random")
    p.add_argument("--n", type=int)
    p.add_argument("--reps", type=int)
    p.add_argument("--stat", choices=("lr", "slr", "both"))
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--samples", type=Path, help="write raw per-replication statistics (CSV)")
    p.add_argument("--histogram-csv", type=Path)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("oracle", parents=[common], help="exact enumeration checks on a small population")
    p.add_argument("population")
    p.add_argument("--checks", choices=("all",) + CHECKS, default="all")
    p.add_argument("--cap", type=int, default=DEFAULT_CAP)
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("moments", parents=[common], help="closed-form moments and condition diagnostics")
    p.add_argument("population")
    p.set_defaults(func=cmd_moments)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (InputError, UsageError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
