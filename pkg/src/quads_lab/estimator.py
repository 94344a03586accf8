"""Classical surrogates and oracle-count estimation for high dimensions.

Statevectors grow as 2^(D*tau), so beyond a few dimensions the quantum
optimizers are replaced by classically sampled twins with identical control
flow. Each generation's acceptance rate p~ = accepted/attempts feeds the
optimal rotation count n_opt(p), whose per-trial sum lower-bounds the quantum
cost; scaling by the empirical constant 2.3 gives the point estimate. The
same 2.3 emerges from the expected-rotation series of the adaptive
rotation-schedule acceptance process, computed here as ``s_of_p``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .cma import (
    DistributionState,
    NumericalBlowup,
    cholesky_factor,
    cma_update,
    default_hyperparams,
    sample_truncated_point,
    select_best,
)
from .optimizers import QuadsConfig, update_threshold
from .testbed import Grid, ObjectiveSpec, OptimumRecord, snap_to_grid
from .trials import (
    BudgetExhausted,
    GlobalHitFound,
    OracleCounter,
    Outcome,
    TrialRecord,
    TrialTracker,
)


class SeriesDiverged(Exception):
    """Rejection-mass tail did not fall below tolerance within the term cap."""


def n_opt(p: float) -> float:
    """Optimal rotation count arccos(sqrt p) / (2 arcsin(sqrt p)), p in (0, 1]."""
    if not 0.0 < p <= 1.0:
        raise ValueError(f"p must lie in (0, 1], got {p}")
    root = math.sqrt(p)
    if root >= 1.0:
        return 0.0
    return math.acos(root) / (2.0 * math.asin(root))


def s_of_p(p: float, growth: float, max_terms: int = 20000, tail: float = 1e-12) -> float:
    """Expected total rotations of the adaptive schedule until acceptance.

    Attempt k draws its rotation count uniformly from {0..n_k} with
    n_k = floor(growth^(k-1)); a_r = sin^2((2r+1) arcsin sqrt p) is the
    per-rotation acceptance probability and b_k the per-attempt rejection
    probability. The series is truncated once the surviving rejection mass
    drops below ``tail``.
    """
    if not 0.0 < p < 1.0:
        raise ValueError(f"p must lie in (0, 1), got {p}")
    phi = math.asin(math.sqrt(p))
    total = 0.0
    mass = 1.0  # product of rejection probabilities of earlier attempts
    for k in range(1, max_terms + 1):
        n_k = int(math.floor(growth ** (k - 1)))
        r = np.arange(n_k + 1)
        a = np.sin((2 * r + 1) * phi) ** 2
        total += mass * float(r @ a) / (n_k + 1)
        mass *= 1.0 - float(a.sum()) / (n_k + 1)
        if mass < tail:
            return total
    raise SeriesDiverged(f"rejection mass {mass} above {tail} after {max_terms} terms")


@dataclass(frozen=True)
class IterationStat:
    """Acceptance bookkeeping of one generation of a surrogate trial."""

    index: int
    accepted: int
    attempts: int

    def __post_init__(self):
        if not 1 <= self.accepted <= self.attempts:
            raise ValueError("need 1 <= accepted <= attempts")

    @property
    def p_hat(self) -> float:
        return self.accepted / self.attempts


@dataclass
class SurrogateTrial:
    stats: list[IterationStat]
    outcome: Outcome
    record: TrialRecord


@dataclass(frozen=True)
class EstimateReport:
    o_lower: float
    o_total: float  # coefficient * o_lower, exactly
    o_local_est: float
    o_global_est: float
    p_global: float
    n_trials: int
    n_global: int
    unbounded: bool


def trial_rotation_bound(stats: list[IterationStat], weighted: bool = True) -> float:
    """Lower bound on a trial's quantum rotations: sum of M_i * n_opt(p~_i).

    ``weighted=False`` drops the per-generation multiplicity M_i and reduces
    to a bare sum of n_opt terms.
    """
    return float(
        sum((s.accepted if weighted else 1) * n_opt(s.p_hat) for s in stats)
    )


def uniform_accept(
    grid: Grid,
    theta: float,
    tracker: TrialTracker,
    rng: np.random.Generator,
) -> tuple[np.ndarray, float, int]:
    """Draw uniform grid points until one evaluates strictly below theta.

    Returns (point, value, attempts); every draw is one charged evaluation.
    """
    attempts = 0
    while True:
        digits = rng.integers(0, grid.points_per_dim, size=grid.dim)
        x = (digits + 0.5) / grid.points_per_dim
        attempts += 1
        value = tracker.eval_classical(x)
        if value < theta:
            return x, value, attempts


def gaussian_accept(
    grid: Grid,
    theta: float,
    state: DistributionState,
    chol: np.ndarray,
    tracker: TrialTracker,
    rng: np.random.Generator,
) -> tuple[np.ndarray, float, int]:
    """Draw truncated-normal points snapped to the grid until one beats theta."""
    attempts = 0
    while True:
        x = snap_to_grid(grid, sample_truncated_point(state.mu, state.sigma, chol, rng))
        attempts += 1
        value = tracker.eval_classical(x)
        if value < theta:
            return x, value, attempts


def run_classical_surrogate(
    method: str,
    spec: ObjectiveSpec,
    opt: OptimumRecord,
    grid: Grid,
    config: QuadsConfig,
    rng: np.random.Generator,
) -> SurrogateTrial:
    """Classically sampled twin of ``run_gas`` / ``run_quads``.

    Control flow, thresholds and termination are identical to the quantum
    versions; only the sampling differs (uniform grid draws for "gas",
    truncated normal draws snapped to the grid for "quads"). Acceptance
    statistics (M_i, K_i) are recorded per generation.
    """
    if method not in ("gas", "quads"):
        raise ValueError(f"surrogate method must be 'gas' or 'quads', got {method!r}")
    counter = OracleCounter()
    tracker = TrialTracker(spec, opt, config.eps, counter, config.budget)
    stats: list[IterationStat] = []
    if method == "gas":
        outcome, generations, final_state = _surrogate_gas(
            spec, grid, config, rng, tracker, stats
        )
    else:
        outcome, generations, final_state = _surrogate_quads(
            spec, grid, config, rng, tracker, stats
        )
    record = TrialRecord(
        outcome=outcome,
        quantum_calls=0,
        classical_evals=counter.classical_evals,
        generations=generations,
        best_value_trace=tracker.trace,
        final_state=final_state,
        estimated_quantum_cost=trial_rotation_bound(stats),
    )
    return SurrogateTrial(stats=stats, outcome=outcome, record=record)


def _surrogate_gas(spec, grid, config, rng, tracker, stats):
    theta = np.inf
    try:
        digits = rng.integers(0, grid.points_per_dim, size=grid.dim)
        theta = tracker.eval_classical((digits + 0.5) / grid.points_per_dim)
        i = 0
        while tracker.counter.total() <= config.budget:
            _, value, attempts = uniform_accept(grid, theta, tracker, rng)
            stats.append(IterationStat(index=i, accepted=1, attempts=attempts))
            theta = value
            i += 1
        return Outcome.BUDGET, i, {"theta": float(theta)}
    except GlobalHitFound as hit:
        theta = min(theta, hit.value)
        return Outcome.GLOBAL, len(stats), {"theta": float(theta)}
    except BudgetExhausted:
        return Outcome.BUDGET, len(stats), {"theta": float(theta)}


def _surrogate_quads(spec, grid, config, rng, tracker, stats):
    dim = spec.dimension
    k = config.resolve_k(dim)
    hp = default_hyperparams(dim, k)
    state = DistributionState.initial(rng.uniform(size=dim), config.sigma0)
    theta = np.inf
    accepted_in_gen = 0
    attempts_in_gen = 0

    def flush_partial():
        if accepted_in_gen >= 1:
            stats.append(
                IterationStat(
                    index=state.generation,
                    accepted=accepted_in_gen,
                    attempts=attempts_in_gen,
                )
            )

    def final():
        return {"theta": float(theta), **state.to_dict()}

    try:
        theta = tracker.eval_classical(state.mu)
        while True:
            if state.sigma < config.eps_sigma:
                return Outcome.LOCAL, state.generation, final()
            if tracker.counter.total() > config.budget:
                return Outcome.BUDGET, state.generation, final()
            chol = cholesky_factor(state)
            points, values = [], []
            accepted_in_gen = attempts_in_gen = 0
            for _ in range(k):
                x, value, attempts = gaussian_accept(
                    grid, theta, state, chol, tracker, rng
                )
                points.append(x)
                values.append(value)
                accepted_in_gen += 1
                attempts_in_gen += attempts
            stats.append(
                IterationStat(
                    index=state.generation, accepted=k, attempts=attempts_in_gen
                )
            )
            accepted_in_gen = attempts_in_gen = 0
            state = cma_update(state, select_best(np.array(points), np.array(values), k), hp)
            theta = update_threshold(theta, values, config.alpha, config.quantile)
    except GlobalHitFound:
        flush_partial()
        return Outcome.GLOBAL, state.generation, final()
    except BudgetExhausted:
        flush_partial()
        return Outcome.BUDGET, state.generation, final()
    except NumericalBlowup as exc:
        final_state = final()
        final_state["failure"] = str(exc)
        return Outcome.LOCAL, state.generation, final_state


def estimate_lower_bound(
    trials: list[SurrogateTrial],
    coefficient: float = 2.3,
    weighted: bool = True,
) -> EstimateReport:
    """Fold surrogate trials into the lower-bound / scaled-total estimate.

    Per-trial rotation bounds are averaged separately over globally and
    non-globally converged trials, combined into the single-run expectation,
    and divided by the global-success probability; the total estimate is the
    fixed ``coefficient`` times the lower bound. Zero global successes yield
    an infinite, flagged estimate.
    """
    if not trials:
        raise ValueError("need at least one trial")
    costs = np.array([trial_rotation_bound(t.stats, weighted) for t in trials])
    is_global = np.array([t.outcome is Outcome.GLOBAL for t in trials])
    n = len(trials)
    n_global = int(is_global.sum())
    p_global = n_global / n
    o_global_est = float(costs[is_global].mean()) if n_global else 0.0
    o_local_est = float(costs[~is_global].mean()) if n_global < n else 0.0
    o_single = o_local_est * (1.0 - p_global) + o_global_est * p_global
    if p_global > 0.0:
        o_lower = o_single / p_global
        unbounded = False
    else:
        o_lower = math.inf
        unbounded = True
    return EstimateReport(
        o_lower=o_lower,
        o_total=coefficient * o_lower,
        o_local_est=o_local_est,
        o_global_est=o_global_est,
        p_global=p_global,
        n_trials=n,
        n_global=n_global,
        unbounded=unbounded,
    )
