"""Classical reference optimizers: particle swarm and basin hopping.

Both run on the scaled unit cube and report the shared ``TrialRecord`` so the
harness can rank them against the quantum methods. The basin-hopping local
subroutine is a projected Nelder-Mead simplex (derivative-free; several
benchmarks are non-differentiable), with out-of-bounds vertices clamped onto
the box.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .testbed import ObjectiveSpec, OptimumRecord
from .trials import (
    BudgetExhausted,
    GlobalHitFound,
    OracleCounter,
    Outcome,
    TrialRecord,
    TrialTracker,
)


@dataclass
class Swarm:
    """Particle positions/velocities plus personal and global bests."""

    positions: np.ndarray  # (N, D)
    velocities: np.ndarray  # (N, D)
    best_positions: np.ndarray  # (N, D)
    best_values: np.ndarray  # (N,)
    global_best: np.ndarray  # (D,)
    global_best_value: float
    inertia: float = 0.9
    c_personal: float = 0.5
    c_global: float = 0.3


def init_swarm(
    spec: ObjectiveSpec,
    n_particles: int,
    tracker: TrialTracker,
    rng: np.random.Generator,
    inertia: float = 0.9,
    c_personal: float = 0.5,
    c_global: float = 0.3,
) -> Swarm:
    """Uniform-random positions, zero velocities; all initial points evaluated."""
    dim = spec.dimension
    positions = rng.uniform(size=(n_particles, dim))
    values = np.array([tracker.eval_classical(p) for p in positions])
    g = int(np.argmin(values))
    return Swarm(
        positions=positions,
        velocities=np.zeros((n_particles, dim)),
        best_positions=positions.copy(),
        best_values=values,
        global_best=positions[g].copy(),
        global_best_value=float(values[g]),
        inertia=inertia,
        c_personal=c_personal,
        c_global=c_global,
    )


def pso_step(swarm: Swarm, tracker: TrialTracker, rng: np.random.Generator) -> Swarm:
    """One synchronous swarm update.

    Every particle draws fresh scalar multipliers r1, r2 and moves against the
    start-of-step bests; positions are clamped to [0,1]^D with the clamped
    velocity components zeroed, then all new positions are evaluated and the
    bests refreshed. Mutates and returns the swarm.
    """
    n, dim = swarm.positions.shape
    g_best = swarm.global_best.copy()
    for i in range(n):
        r1 = rng.random()
        r2 = rng.random()
        v = (
            swarm.inertia * swarm.velocities[i]
            + swarm.c_personal * r1 * (swarm.best_positions[i] - swarm.positions[i])
            + swarm.c_global * r2 * (g_best - swarm.positions[i])
        )
        x = swarm.positions[i] + v
        clamped = (x < 0.0) | (x > 1.0)
        v[clamped] = 0.0
        swarm.velocities[i] = v
        swarm.positions[i] = np.clip(x, 0.0, 1.0)
    for i in range(n):
        value = tracker.eval_classical(swarm.positions[i])
        if value < swarm.best_values[i]:
            swarm.best_values[i] = value
            swarm.best_positions[i] = swarm.positions[i].copy()
    g = int(np.argmin(swarm.best_values))
    if swarm.best_values[g] < swarm.global_best_value:
        swarm.global_best_value = float(swarm.best_values[g])
        swarm.global_best = swarm.best_positions[g].copy()
    return swarm


def run_pso(
    spec: ObjectiveSpec,
    opt: OptimumRecord,
    rng: np.random.Generator,
    budget: int,
    eps: float = 0.01,
    n_particles: int | None = None,
    stall_iters: int = 50,
    stall_tol: float = 1e-12,
) -> TrialRecord:
    """Swarm trial: ends Global on an eps-hit, Local after ``stall_iters``
    steps without global-best improvement, Budget past the evaluation cap."""
    counter = OracleCounter()
    tracker = TrialTracker(spec, opt, eps, counter, budget)
    n_particles = n_particles or 10 * spec.dimension
    iterations = 0
    outcome = Outcome.LOCAL
    try:
        swarm = init_swarm(spec, n_particles, tracker, rng)
        stale = 0
        while stale < stall_iters:
            previous = swarm.global_best_value
            pso_step(swarm, tracker, rng)
            iterations += 1
            stale = 0 if previous - swarm.global_best_value > stall_tol else stale + 1
    except GlobalHitFound:
        outcome = Outcome.GLOBAL
    except BudgetExhausted:
        outcome = Outcome.BUDGET
    return TrialRecord(
        outcome=outcome,
        quantum_calls=0,
        classical_evals=counter.classical_evals,
        generations=iterations,
        best_value_trace=tracker.trace,
        final_state={"best_value": float(tracker.best)} if tracker.trace else None,
    )


def nelder_mead(
    fn,
    x0: np.ndarray,
    initial_step: float = 0.05,
    max_iter: int | None = None,
    xatol: float = 1e-8,
    fatol: float = 1e-12,
) -> tuple[np.ndarray, float, bool]:
    """Nelder-Mead simplex descent projected onto [0,1]^D.

    Every candidate vertex is clamped into the box before evaluation, so the
    search never leaves the domain. Returns (x, value, converged); on hitting
    ``max_iter`` the best vertex so far is returned with converged=False.
    """
    dim = len(x0)
    max_iter = max_iter or 200 * dim
    alpha, gamma, rho, shrink = 1.0, 2.0, 0.5, 0.5

    def clamp(x):
        return np.clip(x, 0.0, 1.0)

    simplex = [clamp(np.asarray(x0, dtype=float))]
    for d in range(dim):
        v = simplex[0].copy()
        v[d] = v[d] + initial_step if v[d] + initial_step <= 1.0 else v[d] - initial_step
        simplex.append(v)
    simplex = np.array(simplex)
    values = np.array([fn(v) for v in simplex])

    for _ in range(max_iter):
        order = np.argsort(values, kind="stable")
        simplex, values = simplex[order], values[order]
        if (
            np.max(np.abs(simplex[1:] - simplex[0])) < xatol
            and np.max(np.abs(values[1:] - values[0])) < fatol
        ):
            return simplex[0], float(values[0]), True
        centroid = simplex[:-1].mean(axis=0)
        reflected = clamp(centroid + alpha * (centroid - simplex[-1]))
        f_r = fn(reflected)
        if f_r < values[0]:
            expanded = clamp(centroid + gamma * (reflected - centroid))
            f_e = fn(expanded)
            if f_e < f_r:
                simplex[-1], values[-1] = expanded, f_e
            else:
                simplex[-1], values[-1] = reflected, f_r
        elif f_r < values[-2]:
            simplex[-1], values[-1] = reflected, f_r
        else:
            contracted = clamp(centroid + rho * (simplex[-1] - centroid))
            f_c = fn(contracted)
            if f_c < values[-1]:
                simplex[-1], values[-1] = contracted, f_c
            else:
                for i in range(1, dim + 1):
                    simplex[i] = clamp(simplex[0] + shrink * (simplex[i] - simplex[0]))
                    values[i] = fn(simplex[i])
    order = np.argsort(values, kind="stable")
    return simplex[order[0]], float(values[order[0]]), False


def local_minimize(
    spec: ObjectiveSpec,
    x0: np.ndarray,
    tracker: TrialTracker | None = None,
    max_iter: int | None = None,
) -> tuple[np.ndarray, float]:
    """Bounded derivative-free descent from x0; result never above f(x0).

    With a tracker, every evaluation is charged and hit-checked; without one,
    evaluations are free (unit-test convenience).
    """
    x0 = np.asarray(x0, dtype=float)
    if np.any(x0 < 0.0) or np.any(x0 > 1.0):
        raise ValueError("x0 must lie in the unit cube")
    fn = tracker.eval_classical if tracker is not None else lambda x: float(spec.evaluate_scaled(x))
    # x0 stays in the simplex and the incumbent never worsens, so value <= f(x0).
    x, value, _ = nelder_mead(fn, x0, max_iter=max_iter)
    return x, value


def run_basinhopping(
    spec: ObjectiveSpec,
    opt: OptimumRecord,
    rng: np.random.Generator,
    budget: int,
    eps: float = 0.01,
    max_hops: int = 100,
    step_scale: float = 0.25,
    temperature: float = 1.0,
) -> TrialRecord:
    """Perturb / clamp / locally minimize / Metropolis-accept loop.

    Perturbations are uniform in [-step_scale, step_scale]^D with
    out-of-bounds coordinates adjusted to the nearest boundary; acceptance is
    Metropolis at the given temperature on objective differences. Ends Global
    on an eps-hit, Local at the hop cap, Budget past the evaluation cap.
    """
    counter = OracleCounter()
    tracker = TrialTracker(spec, opt, eps, counter, budget)
    hops = 0
    outcome = Outcome.LOCAL
    try:
        current, current_value = local_minimize(spec, rng.uniform(size=spec.dimension), tracker)
        while hops < max_hops:
            trial_start = np.clip(
                current + rng.uniform(-step_scale, step_scale, size=spec.dimension), 0.0, 1.0
            )
            candidate, candidate_value = local_minimize(spec, trial_start, tracker)
            hops += 1
            delta = candidate_value - current_value
            if delta < 0.0 or rng.random() < np.exp(-delta / temperature):
                current, current_value = candidate, candidate_value
    except GlobalHitFound:
        outcome = Outcome.GLOBAL
    except BudgetExhausted:
        outcome = Outcome.BUDGET
    return TrialRecord(
        outcome=outcome,
        quantum_calls=0,
        classical_evals=counter.classical_evals,
        generations=hops,
        best_value_trace=tracker.trace,
        final_state={"best_value": float(tracker.best)} if tracker.trace else None,
    )
