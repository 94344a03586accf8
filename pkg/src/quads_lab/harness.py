"""Experiment orchestration: plans, metric aggregation, bootstrap intervals,
scaling regression, and a resumable on-disk result store.

A plan is a grid of (method, function, dimension) cells at fixed tau; every
cell runs a fixed number of seeded trials and lands in one JSON-lines file.
Per-trial seeds are stable hashes of (master seed, method, function, D, tau,
trial index), so reruns and parallel execution reproduce identical bytes.
"""
from __future__ import annotations

import hashlib
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import baselines, cma, estimator, optimizers, testbed
from .optimizers import QuadsConfig
from .testbed import Grid, GridTooLarge, locate_optimum_auto
from .trials import Outcome, TrialRecord

METHODS = ("quads", "gas", "cmaes", "pso", "basinhopping")
QUANTUM_METHODS = ("quads", "gas")


class PlanError(Exception):
    """Invalid experiment plan."""


class InfeasibleCell(Exception):
    """Cell needs a statevector beyond the memory cap and no fallback is enabled."""


@dataclass(frozen=True)
class ExperimentPlan:
    methods: tuple[str, ...]
    functions: tuple[str, ...]
    dimensions: tuple[int, ...]
    tau: int = 8
    trials: int = 100
    master_seed: int = 0
    budget: int = 10**6
    out_dir: str = "results"
    estimator_fallback: bool = False
    workers: int = 1

    def validate(self) -> None:
        unknown = [m for m in self.methods if m not in METHODS]
        if unknown:
            raise PlanError(f"unknown methods {unknown}; choose from {METHODS}")
        known = testbed.function_names()
        missing = [f for f in self.functions if f not in known]
        if missing:
            raise PlanError(f"unknown functions {missing}; choose from {known}")
        if not self.methods or not self.functions or not self.dimensions:
            raise PlanError("methods, functions and dimensions must be non-empty")
        if any(d < 1 for d in self.dimensions):
            raise PlanError("dimensions must be positive")
        if self.tau < 1:
            raise PlanError("tau must be positive")
        if self.trials < 1:
            raise PlanError("trials must be positive")
        if self.budget < 0:
            raise PlanError("budget must be non-negative")

    def cells(self) -> list[tuple[str, str, int]]:
        return [
            (m, f, d)
            for m in self.methods
            for f in self.functions
            for d in self.dimensions
        ]


@dataclass(frozen=True)
class RunStats:
    """Aggregated oracle-call metrics of one cell."""

    n_trials: int
    n_global: int
    n_budget: int
    p_global: float
    o_local: float
    o_global: float

    @property
    def o_single(self) -> float:
        return self.o_local * (1.0 - self.p_global) + self.o_global * self.p_global

    @property
    def o_total(self) -> float:
        return self.o_single / self.p_global if self.p_global > 0.0 else math.inf

    @property
    def unbounded(self) -> bool:
        return self.p_global == 0.0


def combined_cost(record: TrialRecord) -> int:
    return record.quantum_calls + record.classical_evals


def aggregate(records: list[TrialRecord]) -> RunStats:
    """Fold trial records into the single-run / until-global expectations.

    Budget-capped trials pool with locally converged ones as failures; a cell
    with no global successes reports an infinite, flagged o_total.
    """
    if not records:
        raise ValueError("need at least one trial record")
    costs = np.array([combined_cost(r) for r in records], dtype=float)
    is_global = np.array([r.outcome is Outcome.GLOBAL for r in records])
    n = len(records)
    n_global = int(is_global.sum())
    return RunStats(
        n_trials=n,
        n_global=n_global,
        n_budget=sum(r.outcome is Outcome.BUDGET for r in records),
        p_global=n_global / n,
        o_local=float(costs[~is_global].mean()) if n_global < n else 0.0,
        o_global=float(costs[is_global].mean()) if n_global else 0.0,
    )


def bootstrap_ci(
    records: list[TrialRecord],
    resamples: int = 2000,
    rng: np.random.Generator | None = None,
) -> tuple[float, float]:
    """Empirical 5th/95th percentiles of o_total under trial resampling.

    Resamples with zero global successes contribute an infinite o_total; an
    infinite upper (or lower) percentile means that bound cannot be estimated
    from the data.
    """
    if not records:
        raise ValueError("need at least one trial record")
    rng = rng or np.random.default_rng(0)
    n = len(records)
    costs = np.array([combined_cost(r) for r in records], dtype=float)
    is_global = np.array([r.outcome is Outcome.GLOBAL for r in records])
    totals = np.empty(resamples)
    for b in range(resamples):
        idx = rng.integers(0, n, size=n)
        g = is_global[idx]
        n_g = int(g.sum())
        if n_g == 0:
            totals[b] = math.inf
            continue
        p = n_g / n
        o_g = costs[idx][g].mean()
        o_l = costs[idx][~g].mean() if n_g < n else 0.0
        totals[b] = (o_l * (1.0 - p) + o_g * p) / p
    return _percentile_with_inf(totals, 5.0), _percentile_with_inf(totals, 95.0)


def _percentile_with_inf(values: np.ndarray, q: float) -> float:
    """Linear-interpolation percentile that tolerates infinite entries."""
    s = np.sort(values)
    pos = q / 100.0 * (len(s) - 1)
    lo_i = int(math.floor(pos))
    hi_i = int(math.ceil(pos))
    a, b = float(s[lo_i]), float(s[hi_i])
    frac = pos - lo_i
    if a == b or frac == 0.0:
        return a
    if not math.isfinite(b):
        return math.inf
    return a + (b - a) * frac


def scaling_regression(points: list[tuple[int, float]]) -> tuple[float, float, float]:
    """Least squares of log10(o_total) on dimension: (slope, intercept, r2)."""
    pts = [(d, o) for d, o in points if math.isfinite(o) and o > 0.0]
    if len({d for d, _ in pts}) < 2:
        raise ValueError("need at least two distinct dimensions with finite o_total")
    x = np.array([d for d, _ in pts], dtype=float)
    y = np.log10([o for _, o in pts])
    slope, intercept = np.polyfit(x, y, 1)
    residuals = y - (slope * x + intercept)
    ss_res = float(np.sum(residuals**2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0.0 else 1.0 - ss_res / ss_tot
    if ss_res < 1e-30:
        r2 = 1.0
    return float(slope), float(intercept), r2


def trial_seed(master_seed: int, method: str, function: str, dim: int, tau: int, index: int) -> int:
    """Stable per-trial seed; independent of execution order and platform."""
    key = f"{master_seed}|{method}|{function}|{dim}|{tau}|{index}".encode()
    return int.from_bytes(hashlib.blake2b(key, digest_size=8).digest(), "big")


def statevector_feasible(dim: int, tau: int) -> bool:
    return dim * tau <= int(math.log2(testbed.MAX_SCAN_POINTS))


def run_single_trial(
    method: str,
    function: str,
    dim: int,
    tau: int,
    seed: int,
    budget: int,
    surrogate: bool = False,
) -> TrialRecord:
    """One seeded trial of any method; surrogate=True swaps a quantum method
    for its classical twin (needed above the statevector cap)."""
    spec = testbed.get_objective(function, dim)
    grid = Grid(dim, tau)
    opt = locate_optimum_auto(spec, grid)
    rng = np.random.default_rng(seed)
    config = QuadsConfig(budget=budget, tau=tau)
    if method in QUANTUM_METHODS and surrogate:
        return estimator.run_classical_surrogate(method, spec, opt, grid, config, rng).record
    if method == "quads":
        return optimizers.run_quads(spec, opt, grid, config, rng)
    if method == "gas":
        return optimizers.run_gas(spec, opt, grid, config, rng)
    if method == "cmaes":
        return cma.run_cmaes(spec, opt, rng, budget=budget, eps=config.eps)
    if method == "pso":
        return baselines.run_pso(spec, opt, rng, budget=budget, eps=config.eps)
    if method == "basinhopping":
        return baselines.run_basinhopping(spec, opt, rng, budget=budget, eps=config.eps)
    raise PlanError(f"unknown method {method!r}")


def _trial_task(args: tuple) -> tuple[int, dict]:
    method, function, dim, tau, index, seed, budget, surrogate = args
    record = run_single_trial(method, function, dim, tau, seed, budget, surrogate)
    payload = {
        "method": method,
        "function": function,
        "dim": dim,
        "tau": tau,
        "trial": index,
        "seed": seed,
        "surrogate": surrogate,
        **record.to_dict(),
    }
    return index, payload


def cell_filename(method: str, function: str, dim: int, tau: int) -> str:
    return f"{method}__{function}__d{dim}_t{tau}.jsonl"


class ResultStore:
    """Directory of per-cell JSON-lines files plus a completion manifest."""

    def __init__(self, root: str | Path):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self.manifest_path = self.root / "manifest.json"

    def manifest(self) -> dict:
        if self.manifest_path.exists():
            return json.loads(self.manifest_path.read_text())
        return {"cells": {}}

    def _write_manifest(self, manifest: dict) -> None:
        self.manifest_path.write_text(json.dumps(manifest, indent=2, sort_keys=True))

    def cell_key(self, method: str, function: str, dim: int, tau: int) -> str:
        return f"{method}|{function}|{dim}|{tau}"

    def is_complete(self, method: str, function: str, dim: int, tau: int) -> bool:
        return self.cell_key(method, function, dim, tau) in self.manifest()["cells"]

    def mark_complete(self, method: str, function: str, dim: int, tau: int, meta: dict) -> None:
        manifest = self.manifest()
        manifest["cells"][self.cell_key(method, function, dim, tau)] = meta
        self._write_manifest(manifest)

    def write_cell(self, method: str, function: str, dim: int, tau: int, payloads: list[dict]) -> Path:
        path = self.root / cell_filename(method, function, dim, tau)
        with open(path, "w") as fh:
            for payload in payloads:
                fh.write(json.dumps(payload, sort_keys=True) + "\n")
        return path

    def read_cell(self, method: str, function: str, dim: int, tau: int) -> list[dict]:
        path = self.root / cell_filename(method, function, dim, tau)
        with open(path) as fh:
            return [json.loads(line) for line in fh if line.strip()]

    def read_records(self, method: str, function: str, dim: int, tau: int) -> list[TrialRecord]:
        return [TrialRecord.from_dict(d) for d in self.read_cell(method, function, dim, tau)]

    def completed_cells(self) -> list[tuple[str, str, int, int]]:
        out = []
        for key in self.manifest()["cells"]:
            method, function, dim, tau = key.split("|")
            out.append((method, function, int(dim), int(tau)))
        return out


def run_experiment(plan: ExperimentPlan) -> ResultStore:
    """Execute all incomplete cells of the plan into its result store.

    Infeasible statevector cells either route to the classical surrogate
    (``estimator_fallback``) or raise InfeasibleCell. Trials may run in a
    process pool; records are always written in trial order, so outputs are
    byte-identical for a given plan and master seed.
    """
    plan.validate()
    store = ResultStore(plan.out_dir)
    for method, function, dim in plan.cells():
        if store.is_complete(method, function, dim, plan.tau):
            continue
        surrogate = False
        if method in QUANTUM_METHODS and not statevector_feasible(dim, plan.tau):
            if not plan.estimator_fallback:
                raise InfeasibleCell(
                    f"{method}/{function} at D={dim}, tau={plan.tau} exceeds the "
                    "statevector cap; enable the estimator fallback or drop the cell"
                )
            surrogate = True
        tasks = [
            (
                method,
                function,
                dim,
                plan.tau,
                i,
                trial_seed(plan.master_seed, method, function, dim, plan.tau, i),
                plan.budget,
                surrogate,
            )
            for i in range(plan.trials)
        ]
        if plan.workers > 1:
            with ProcessPoolExecutor(max_workers=plan.workers) as pool:
                results = list(pool.map(_trial_task, tasks))
        else:
            results = [_trial_task(t) for t in tasks]
        payloads = [payload for _, payload in sorted(results, key=lambda r: r[0])]
        store.write_cell(method, function, dim, plan.tau, payloads)
        store.mark_complete(
            method,
            function,
            dim,
            plan.tau,
            {"trials": plan.trials, "budget": plan.budget, "surrogate": surrogate},
        )
    return store


def summarize_store(store: ResultStore, resamples: int = 2000) -> list[dict]:
    """RunStats plus bootstrap interval for every completed cell."""
    rows = []
    for method, function, dim, tau in sorted(store.completed_cells()):
        records = store.read_records(method, function, dim, tau)
        stats = aggregate(records)
        lo, hi = bootstrap_ci(records, resamples=resamples, rng=np.random.default_rng(1))
        rows.append(
            {
                "method": method,
                "function": function,
                "dim": dim,
                "tau": tau,
                "n_trials": stats.n_trials,
                "n_global": stats.n_global,
                "n_budget": stats.n_budget,
                "p_global": stats.p_global,
                "o_local": stats.o_local,
                "o_global": stats.o_global,
                "o_single": stats.o_single,
                "o_total": stats.o_total,
                "ci_lo": lo,
                "ci_hi": hi,
            }
        )
    return rows
