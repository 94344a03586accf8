"""CSV and SVG emission from a result store.

Produces per-cell summary tables with bootstrap intervals, per-trial
convergence traces with fraction-solved curves, dimension-scaling tables with
regression parameters, and static SVG charts rendered from the same data.
"""
from __future__ import annotations

import csv
import math
from collections import defaultdict
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from .harness import ResultStore, scaling_regression, summarize_store
from .trials import Outcome, TrialRecord

SUMMARY_FIELDS = [
    "method", "function", "dim", "tau", "n_trials", "n_global", "n_budget",
    "p_global", "o_local", "o_global", "o_single", "o_total", "ci_lo", "ci_hi",
]


def write_summary_csv(rows: list[dict], path: Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=SUMMARY_FIELDS)
        writer.writeheader()
        for row in rows:
            writer.writerow({k: row[k] for k in SUMMARY_FIELDS})


def write_trace_csv(records: list[TrialRecord], path: Path) -> None:
    """Best value against cumulative combined calls, one row per trace point."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["trial", "outcome", "combined_calls", "best_value"])
        for i, record in enumerate(records):
            for calls, value in record.best_value_trace:
                writer.writerow([i, record.outcome.value, calls, value])


def fraction_solved_curve(records: list[TrialRecord]) -> list[tuple[int, float, float]]:
    """(calls, fraction solved globally, fraction terminated) checkpoints."""
    n = len(records)
    finals = sorted(
        (r.quantum_calls + r.classical_evals, r.outcome is Outcome.GLOBAL) for r in records
    )
    out = []
    solved = done = 0
    for calls, is_global in finals:
        done += 1
        solved += bool(is_global)
        out.append((calls, solved / n, done / n))
    return out


def write_fraction_solved_csv(records: list[TrialRecord], path: Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["combined_calls", "fraction_global", "fraction_done"])
        for row in fraction_solved_curve(records):
            writer.writerow(row)


def scaling_rows(summary: list[dict]) -> list[dict]:
    """Per (method, function): o_total against dimension plus regression fit."""
    groups: dict[tuple[str, str], list[dict]] = defaultdict(list)
    for row in summary:
        groups[(row["method"], row["function"])].append(row)
    out = []
    for (method, function), rows in sorted(groups.items()):
        points = [(r["dim"], r["o_total"]) for r in rows]
        try:
            slope, intercept, r2 = scaling_regression(points)
        except ValueError:
            slope = intercept = r2 = math.nan
        for r in sorted(rows, key=lambda r: r["dim"]):
            out.append(
                {
                    "method": method,
                    "function": function,
                    "dim": r["dim"],
                    "o_total": r["o_total"],
                    "slope": slope,
                    "intercept": intercept,
                    "r2": r2,
                }
            )
    return out


def write_scaling_csv(summary: list[dict], path: Path) -> None:
    fields = ["method", "function", "dim", "o_total", "slope", "intercept", "r2"]
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fields)
        writer.writeheader()
        for row in scaling_rows(summary):
            writer.writerow(row)


def plot_totals_bar(summary: list[dict], function: str, path: Path) -> None:
    rows = [r for r in summary if r["function"] == function]
    if not rows:
        return
    methods = [r["method"] for r in rows]
    totals = [r["o_total"] for r in rows]
    fig, ax = plt.subplots(figsize=(6, 4))
    finite_max = max([t for t in totals if math.isfinite(t)], default=1.0)
    heights = [t if math.isfinite(t) else finite_max * 10 for t in totals]
    errs = []
    for r, h in zip(rows, heights):
        lo = r["ci_lo"] if math.isfinite(r["ci_lo"]) else h
        hi = r["ci_hi"] if math.isfinite(r["ci_hi"]) else h
        errs.append((max(h - lo, 0.0), max(hi - h, 0.0)))
    yerr = np.array(errs).T
    ax.bar(methods, heights, yerr=yerr, capsize=4, color="#4878d0")
    ax.set_yscale("log")
    ax.set_ylabel("expected oracle calls until global optimum")
    ax.set_title(function)
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)


def plot_scaling(summary: list[dict], function: str, path: Path) -> None:
    rows = [r for r in scaling_rows(summary) if r["function"] == function]
    if not rows:
        return
    fig, ax = plt.subplots(figsize=(6, 4))
    by_method: dict[str, list[dict]] = defaultdict(list)
    for r in rows:
        by_method[r["method"]].append(r)
    for method, mrows in sorted(by_method.items()):
        dims = [r["dim"] for r in mrows]
        totals = [r["o_total"] for r in mrows]
        ax.plot(dims, totals, "o", label=method)
        slope, intercept = mrows[0]["slope"], mrows[0]["intercept"]
        if math.isfinite(slope):
            xs = np.linspace(min(dims), max(dims), 50)
            ax.plot(xs, 10 ** (slope * xs + intercept), "-", alpha=0.6)
    ax.set_yscale("log")
    ax.set_xlabel("dimension")
    ax.set_ylabel("expected oracle calls until global optimum")
    ax.set_title(function)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)


def plot_convergence(records: list[TrialRecord], title: str, path: Path) -> None:
    fig, (ax_top, ax_bot) = plt.subplots(2, 1, figsize=(6, 6), sharex=True)
    for record in records:
        if not record.best_value_trace:
            continue
        calls = [c for c, _ in record.best_value_trace]
        vals = [v for _, v in record.best_value_trace]
        end = record.quantum_calls + record.classical_evals
        ax_top.step([*calls, end], [*vals, vals[-1]], where="post", alpha=0.3, color="#4878d0")
        marker = "o" if record.outcome is Outcome.GLOBAL else "x"
        ax_top.plot([end], [vals[-1]], marker, color="#4878d0", markersize=4)
    curve = fraction_solved_curve(records)
    if curve:
        xs = [c for c, _, _ in curve]
        ax_bot.step(xs, [g for _, g, _ in curve], where="post", label="found global")
        ax_bot.step(xs, [d for _, _, d in curve], where="post", linestyle="--", label="terminated")
        ax_bot.legend()
    ax_top.set_ylabel("best value so far")
    ax_bot.set_ylabel("fraction of trials")
    ax_bot.set_xlabel("combined oracle calls")
    ax_bot.set_xscale("log")
    ax_top.set_title(title)
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)


def emit_reports(store: ResultStore, out_dir: str | Path | None = None, resamples: int = 2000) -> list[Path]:
    """Write all CSV tables and SVG charts for the completed cells, returning paths."""
    out = Path(out_dir) if out_dir is not None else store.root / "reports"
    out.mkdir(parents=True, exist_ok=True)
    summary = summarize_store(store, resamples=resamples)
    written = []

    summary_path = out / "summary.csv"
    write_summary_csv(summary, summary_path)
    written.append(summary_path)

    scaling_path = out / "scaling.csv"
    write_scaling_csv(summary, scaling_path)
    written.append(scaling_path)

    for method, function, dim, tau in sorted(store.completed_cells()):
        records = store.read_records(method, function, dim, tau)
        stem = f"{method}__{function}__d{dim}_t{tau}"
        trace_path = out / f"{stem}__trace.csv"
        write_trace_csv(records, trace_path)
        written.append(trace_path)
        frac_path = out / f"{stem}__fraction_solved.csv"
        write_fraction_solved_csv(records, frac_path)
        written.append(frac_path)
        conv_path = out / f"{stem}__convergence.svg"
        plot_convergence(records, stem, conv_path)
        written.append(conv_path)

    for function in sorted({f for _, f, _, _ in store.completed_cells()}):
        bar_path = out / f"{function}__totals.svg"
        plot_totals_bar(summary, function, bar_path)
        if bar_path.exists():
            written.append(bar_path)
        dims = {d for _, f2, d, _ in store.completed_cells() if f2 == function}
        if len(dims) >= 2:
            scal_path = out / f"{function}__scaling.svg"
            plot_scaling(summary, function, scal_path)
            written.append(scal_path)
    return written
