"""Command-line interface.

Subcommands: ``run`` (execute an experiment plan), ``estimate`` (classical
surrogate plus scaled lower-bound estimate), ``calibrate`` (re-derive the
lower-bound-to-total coefficient from paired runs), ``report`` (CSV/SVG
emission) and ``list-functions``. A JSON config file mirrors all flags;
explicit flags override the file. Exit codes: 0 success, 2 invalid plan,
3 infeasible cell.
"""
from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import estimator, harness, optimizers, testbed
from .harness import ExperimentPlan, InfeasibleCell, PlanError, ResultStore
from .testbed import Grid, locate_optimum_auto

EXIT_OK = 0
EXIT_INVALID_PLAN = 2
EXIT_INFEASIBLE = 3


def _csv_list(value: str) -> list[str]:
    return [v.strip() for v in value.split(",") if v.strip()]


def _csv_ints(value: str) -> list[int]:
    return [int(v) for v in _csv_list(value)]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="quads-lab")
    parser.add_argument("--config", help="JSON file of flag defaults", default=None)
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="execute an experiment plan")
    run.add_argument("--method", type=_csv_list, default=["quads"],
                     help="comma-separated subset of " + ",".join(harness.METHODS))
    run.add_argument("--function", type=_csv_list, default=["rastrigin"])
    run.add_argument("--dim", type=_csv_ints, default=[2])
    run.add_argument("--tau", type=int, default=8)
    run.add_argument("--trials", type=int, default=100)
    run.add_argument("--seed", type=int, default=0)
    run.add_argument("--budget", type=int, default=10**6)
    run.add_argument("--out", default="results")
    run.add_argument("--workers", type=int, default=1)
    run.add_argument("--fallback-estimator", action="store_true",
                     help="route infeasible statevector cells to the classical surrogate")

    est = sub.add_parser("estimate", help="surrogate run plus scaled lower-bound estimate")
    est.add_argument("--method", choices=["quads", "gas"], default="quads")
    est.add_argument("--function", required=True)
    est.add_argument("--dim", type=int, required=True)
    est.add_argument("--tau", type=int, default=8)
    est.add_argument("--trials", type=int, default=100)
    est.add_argument("--seed", type=int, default=0)
    est.add_argument("--budget", type=int, default=10**6)
    est.add_argument("--coefficient", type=float, default=2.3)
    est.add_argument("--out", default=None, help="optional JSON output path")

    cal = sub.add_parser("calibrate", help="re-derive the total/lower-bound coefficient")
    cal.add_argument("--method", choices=["quads", "gas"], default="quads")
    cal.add_argument("--function", type=_csv_list, default=["rastrigin", "ackley", "wavy"])
    cal.add_argument("--dim", type=int, default=2)
    cal.add_argument("--tau", type=int, default=6)
    cal.add_argument("--trials", type=int, default=100)
    cal.add_argument("--seed", type=int, default=0)
    cal.add_argument("--budget", type=int, default=10**5)
    cal.add_argument("--out", default=None, help="optional JSON output path")

    rep = sub.add_parser("report", help="emit CSV tables and SVG charts")
    rep.add_argument("--store", required=True, help="result store directory")
    rep.add_argument("--out", default=None, help="report directory (default <store>/reports)")
    rep.add_argument("--resamples", type=int, default=2000)

    lst = sub.add_parser("list-functions", help="list benchmark functions")
    lst.add_argument("--json", action="store_true", help="emit JSON descriptors")
    lst.add_argument("--dim", type=int, default=2, help="dimension for descriptors")
    return parser


def _apply_config(parser: argparse.ArgumentParser, argv: list[str]) -> argparse.Namespace:
    probe = argparse.ArgumentParser(add_help=False)
    probe.add_argument("--config", default=None)
    known, _ = probe.parse_known_args(argv)
    if known.config:
        defaults = json.loads(Path(known.config).read_text())
        for action in parser._subparsers._group_actions[0].choices.values():  # type: ignore[union-attr]
            action.set_defaults(**{k: v for k, v in defaults.items()
                                   if k in {a.dest for a in action._actions}})
    return parser.parse_args(argv)


def cmd_run(args) -> int:
    plan = ExperimentPlan(
        methods=tuple(args.method),
        functions=tuple(args.function),
        dimensions=tuple(args.dim),
        tau=args.tau,
        trials=args.trials,
        master_seed=args.seed,
        budget=args.budget,
        out_dir=args.out,
        estimator_fallback=args.fallback_estimator,
        workers=args.workers,
    )
    try:
        plan.validate()
    except PlanError as exc:
        print(f"invalid plan: {exc}", file=sys.stderr)
        return EXIT_INVALID_PLAN
    try:
        store = harness.run_experiment(plan)
    except InfeasibleCell as exc:
        print(f"infeasible cell: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    for row in harness.summarize_store(store, resamples=500):
        print(json.dumps(row, sort_keys=True))
    print(f"results in {store.root}", file=sys.stderr)
    return EXIT_OK


def cmd_estimate(args) -> int:
    try:
        spec = testbed.get_objective(args.function, args.dim)
    except KeyError as exc:
        print(f"invalid plan: {exc}", file=sys.stderr)
        return EXIT_INVALID_PLAN
    grid = Grid(args.dim, args.tau)
    opt = locate_optimum_auto(spec, grid)
    config = optimizers.QuadsConfig(budget=args.budget, tau=args.tau)
    trials = []
    for i in range(args.trials):
        seed = harness.trial_seed(args.seed, f"{args.method}-surrogate", args.function,
                                  args.dim, args.tau, i)
        rng = np.random.default_rng(seed)
        trials.append(estimator.run_classical_surrogate(args.method, spec, opt, grid, config, rng))
    report = estimator.estimate_lower_bound(trials, coefficient=args.coefficient)
    payload = {
        "method": args.method,
        "function": args.function,
        "dim": args.dim,
        "tau": args.tau,
        "trials": args.trials,
        **asdict(report),
    }
    text = json.dumps(payload, sort_keys=True)
    print(text)
    if args.out:
        Path(args.out).write_text(text + "\n")
    return EXIT_OK


def cmd_calibrate(args) -> int:
    """Paired quantum-simulation and surrogate runs; coefficient per cell is
    o_total / o_lower, reported with the median across cells."""
    rows = []
    for function in args.function:
        if function not in testbed.function_names():
            print(f"invalid plan: unknown function {function!r}", file=sys.stderr)
            return EXIT_INVALID_PLAN
        if not harness.statevector_feasible(args.dim, args.tau):
            print(f"infeasible cell: {function} at D={args.dim}, tau={args.tau}",
                  file=sys.stderr)
            return EXIT_INFEASIBLE
        spec = testbed.get_objective(function, args.dim)
        grid = Grid(args.dim, args.tau)
        opt = locate_optimum_auto(spec, grid)
        config = optimizers.QuadsConfig(budget=args.budget, tau=args.tau)
        records = []
        surrogates = []
        for i in range(args.trials):
            sim_rng = np.random.default_rng(
                harness.trial_seed(args.seed, args.method, function, args.dim, args.tau, i))
            sur_rng = np.random.default_rng(
                harness.trial_seed(args.seed, f"{args.method}-surrogate", function,
                                   args.dim, args.tau, i))
            if args.method == "quads":
                records.append(optimizers.run_quads(spec, opt, grid, config, sim_rng))
            else:
                records.append(optimizers.run_gas(spec, opt, grid, config, sim_rng))
            surrogates.append(
                estimator.run_classical_surrogate(args.method, spec, opt, grid, config, sur_rng))
        stats = harness.aggregate(records)
        est = estimator.estimate_lower_bound(surrogates, coefficient=1.0)
        ratio = stats.o_total / est.o_lower if est.o_lower > 0 else float("nan")
        rows.append({
            "function": function,
            "o_total_sim": stats.o_total,
            "o_lower_est": est.o_lower,
            "coefficient": ratio,
        })
    finite = [r["coefficient"] for r in rows
              if isinstance(r["coefficient"], float) and np.isfinite(r["coefficient"])]
    payload = {
        "method": args.method,
        "dim": args.dim,
        "tau": args.tau,
        "trials": args.trials,
        "cells": rows,
        "median_coefficient": float(np.median(finite)) if finite else None,
    }
    text = json.dumps(payload, sort_keys=True)
    print(text)
    if args.out:
        Path(args.out).write_text(text + "\n")
    return EXIT_OK


def cmd_report(args) -> int:
    from . import reports  # matplotlib import deferred to this command

    store = ResultStore(args.store)
    written = reports.emit_reports(store, out_dir=args.out, resamples=args.resamples)
    for path in written:
        print(path)
    return EXIT_OK


def cmd_list_functions(args) -> int:
    if args.json:
        descriptors = [testbed.get_objective(name, args.dim).descriptor()
                       for name in testbed.function_names()]
        print(json.dumps(descriptors, indent=2, sort_keys=True))
    else:
        for name in testbed.function_names():
            print(name)
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = _apply_config(parser, list(argv) if argv is not None else sys.argv[1:])
    handlers = {
        "run": cmd_run,
        "estimate": cmd_estimate,
        "calibrate": cmd_calibrate,
        "report": cmd_report,
        "list-functions": cmd_list_functions,
    }
    return handlers[args.command](args)


if __name__ == "__main__":
    sys.exit(main())
