"""Quantum-search optimizers: threshold-descent search from a uniform state
(GAS) and from an adaptively updated normal distribution (QuADS).

Both sample through amplitude amplification and account one quantum call per
search rotation plus one classical call per measured candidate's threshold
verification. A trial ends Global the moment any evaluated point enters the
eps-ball of the grid argmin, Local (QuADS only) when the step size collapses
below ``eps_sigma``, and Budget when combined calls pass the cap.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .cma import (
    DistributionState,
    NumericalBlowup,
    cma_update,
    default_hyperparams,
    default_population,
    select_best,
)
from .quantum import aa_sample, prepare_gaussian_state, prepare_uniform_state
from .testbed import Grid, ObjectiveSpec, OptimumRecord, grid_values, index_to_point
from .trials import (
    BudgetExhausted,
    GlobalHitFound,
    OracleCounter,
    Outcome,
    TrialRecord,
    TrialTracker,
)


@dataclass(frozen=True)
class QuadsConfig:
    """Run parameters shared by the quantum optimizers.

    ``k_best=None`` derives K from the dimension as floor(M/2) with
    M = 4 + 3*floor(ln D).
    """

    alpha: float = 0.5  # threshold smoothing factor
    quantile: float = 0.2
    growth: float = 6.0 / 5.0  # rotation-ceiling growth rate, in (1, 4/3)
    eps: float = 0.01  # global-hit radius (scaled coordinates)
    eps_sigma: float = 0.01  # local-convergence step-size threshold
    sigma0: float = 0.5
    k_best: int | None = None
    budget: int = 10**6  # max combined oracle calls
    tau: int = 8  # bits per dimension

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError("alpha must lie in [0, 1]")
        if not 0.0 < self.quantile < 1.0:
            raise ValueError("quantile must lie in (0, 1)")

    def resolve_k(self, dim: int) -> int:
        return self.k_best if self.k_best is not None else default_population(dim).k_best


def update_threshold(theta: float, sampled_values, alpha: float, quantile: float) -> float:
    """Smoothed quantile rule: alpha*theta + (1-alpha)*quantile_q(values).

    The quantile interpolates linearly between order statistics at rank
    q*(n-1).
    """
    values = np.asarray(sampled_values, dtype=float)
    if values.size == 0:
        raise ValueError("sampled values must be non-empty")
    return float(alpha * theta + (1.0 - alpha) * np.quantile(values, quantile))


def run_gas(
    spec: ObjectiveSpec,
    opt: OptimumRecord,
    grid: Grid,
    config: QuadsConfig,
    rng: np.random.Generator,
) -> TrialRecord:
    """Uniform-state threshold descent: amplify below theta, measure, tighten.

    The initial threshold is the value at one uniform-random grid point
    (charged as a classical call). There is no step size, so the only
    outcomes are Global and Budget.
    """
    counter = OracleCounter()
    tracker = TrialTracker(spec, opt, config.eps, counter, config.budget)
    values = grid_values(spec, grid)
    theta = np.inf

    def record(outcome: Outcome) -> TrialRecord:
        return TrialRecord(
            outcome=outcome,
            quantum_calls=counter.quantum_calls,
            classical_evals=counter.classical_evals,
            generations=0,
            best_value_trace=tracker.trace,
            final_state={"theta": float(theta)},
        )

    try:
        j0 = int(rng.integers(grid.total_points))
        x0 = index_to_point(grid, j0)
        theta = float(values[j0])
        counter.classical_evals += 1
        tracker.observe(x0, theta)
        psi0 = prepare_uniform_state(grid)
        while counter.total() <= config.budget:
            _, accepted_value = aa_sample(
                psi0, spec, grid, theta, config.growth, rng, counter, config.budget,
                on_eval=tracker.observe,
            )
            theta = accepted_value
        return record(Outcome.BUDGET)
    except GlobalHitFound as hit:
        # An accepted hit would have tightened theta before termination.
        theta = min(theta, hit.value)
        return record(Outcome.GLOBAL)
    except BudgetExhausted:
        return record(Outcome.BUDGET)


def run_quads(
    spec: ObjectiveSpec,
    opt: OptimumRecord,
    grid: Grid,
    config: QuadsConfig,
    rng: np.random.Generator,
    on_generation: Callable[[dict], None] | None = None,
) -> TrialRecord:
    """Adaptive-distribution threshold descent.

    Per generation: amplify-and-measure K accepted points from the current
    N(mu, sigma^2 C) initial state, feed them (ordered by value) to the
    distribution update, and smooth the threshold toward their q-quantile.
    The initial mean is uniform-random, sigma0 = 0.5, C = I, and the initial
    threshold is the value at the initial mean (one classical call).
    """
    dim = spec.dimension
    k = config.resolve_k(dim)
    hp = default_hyperparams(dim, k)
    counter = OracleCounter()
    tracker = TrialTracker(spec, opt, config.eps, counter, config.budget)
    state = DistributionState.initial(rng.uniform(size=dim), config.sigma0)
    theta = np.inf

    def record(outcome: Outcome, failure: str | None = None) -> TrialRecord:
        return TrialRecord(
            outcome=outcome,
            quantum_calls=counter.quantum_calls,
            classical_evals=counter.classical_evals,
            generations=state.generation,
            best_value_trace=tracker.trace,
            final_state={"theta": float(theta), **state.to_dict()},
            failure=failure,
        )

    try:
        theta = tracker.eval_classical(state.mu)
        while True:
            if state.sigma < config.eps_sigma:
                return record(Outcome.LOCAL)
            if counter.total() > config.budget:
                return record(Outcome.BUDGET)
            psi0 = prepare_gaussian_state(grid, state.mu, state.covariance())
            points = []
            accepted_values = []
            for _ in range(k):
                x, value = aa_sample(
                    psi0, spec, grid, theta, config.growth, rng, counter, config.budget,
                    on_eval=tracker.observe,
                )
                points.append(x)
                accepted_values.append(value)
            state = cma_update(
                state, select_best(np.array(points), np.array(accepted_values), k), hp
            )
            theta = update_threshold(theta, accepted_values, config.alpha, config.quantile)
            if on_generation is not None:
                on_generation(
                    {
                        "generation": state.generation,
                        "mu": state.mu.tolist(),
                        "sigma": float(state.sigma),
                        "theta": float(theta),
                        "accepted_values": [float(v) for v in accepted_values],
                        "quantum_calls": counter.quantum_calls,
                        "classical_evals": counter.classical_evals,
                    }
                )
    except GlobalHitFound:
        return record(Outcome.GLOBAL)
    except BudgetExhausted:
        return record(Outcome.BUDGET)
    except NumericalBlowup as exc:
        return record(Outcome.LOCAL, failure=str(exc))
