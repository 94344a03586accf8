"""Multivariate-normal search state and its evolution-strategy update rule.

The belief distribution is N(mu, sigma^2 C): ``C`` fixes shape and
orientation, ``sigma`` the overall scale. One update step consumes the K best
samples of a generation (ascending objective value) and adjusts mean, paths,
step size and shape matrix; the same step drives both the standalone CMA-ES
optimizer here and the adaptive quantum search in ``optimizers``.
"""
from __future__ import annotations

import math
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

EIG_FLOOR = 1e-12


class NumericalBlowup(Exception):
    """Non-finite intermediate in a distribution update."""


@dataclass
class DistributionState:
    """Search distribution N(mu, sigma^2 C) plus evolution paths and counter."""

    mu: np.ndarray
    C: np.ndarray
    sigma: float
    p_c: np.ndarray
    p_sigma: np.ndarray
    generation: int = 0

    @classmethod
    def initial(cls, mu: np.ndarray, sigma: float) -> "DistributionState":
        d = len(mu)
        return cls(
            mu=np.asarray(mu, dtype=float).copy(),
            C=np.eye(d),
            sigma=float(sigma),
            p_c=np.zeros(d),
            p_sigma=np.zeros(d),
            generation=0,
        )

    def covariance(self) -> np.ndarray:
        return self.sigma**2 * self.C

    def to_dict(self) -> dict:
        return {
            "mu": self.mu.tolist(),
            "C": self.C.tolist(),
            "sigma": float(self.sigma),
            "p_c": self.p_c.tolist(),
            "p_sigma": self.p_sigma.tolist(),
            "generation": int(self.generation),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DistributionState":
        return cls(
            mu=np.asarray(d["mu"], dtype=float),
            C=np.asarray(d["C"], dtype=float),
            sigma=float(d["sigma"]),
            p_c=np.asarray(d["p_c"], dtype=float),
            p_sigma=np.asarray(d["p_sigma"], dtype=float),
            generation=int(d["generation"]),
        )


@dataclass(frozen=True)
class CmaHyperparams:
    weights: np.ndarray  # positive, descending, sum 1
    mu_eff: float
    c_1: float
    c_sigma: float
    c_c: float
    c_mu: float
    d_sigma: float


@dataclass(frozen=True)
class PopulationConfig:
    m_samples: int
    k_best: int

    def __post_init__(self):
        if not 1 <= self.k_best <= self.m_samples:
            raise ValueError("need 1 <= k_best <= m_samples")


def default_population(dim: int) -> PopulationConfig:
    """M = 4 + 3*floor(ln D) samples, keep the best K = floor(M/2)."""
    if dim < 1:
        raise ValueError("dim must be positive")
    m = 4 + 3 * int(math.floor(math.log(dim)))
    return PopulationConfig(m_samples=m, k_best=m // 2)


def default_hyperparams(dim: int, k_best: int) -> CmaHyperparams:
    """Standard constants for a D-dimensional update from K selected samples."""
    if dim < 1 or k_best < 1:
        raise ValueError("dim and k_best must be positive")
    i = np.arange(1, k_best + 1)
    raw = np.log(k_best + 0.5) - np.log(i)
    weights = raw / raw.sum()
    mu_eff = 1.0 / np.sum(weights**2)
    c_1 = 2.0 / ((dim + 1.3) ** 2 + mu_eff)
    c_sigma = (mu_eff + 2.0) / (dim + mu_eff + 5.0)
    c_mu = min(1.0 - c_1, 2.0 * (mu_eff - 2.0 + 1.0 / mu_eff) / ((dim + 2.0) ** 2 + mu_eff))
    c_c = (4.0 + mu_eff / dim) / (dim + 4.0 + 2.0 * mu_eff / dim)
    d_sigma = 1.0 + 2.0 * max(0.0, math.sqrt((mu_eff - 1.0) / (dim + 1.0)) - 1.0) + c_sigma
    return CmaHyperparams(
        weights=weights,
        mu_eff=float(mu_eff),
        c_1=float(c_1),
        c_sigma=float(c_sigma),
        c_c=float(c_c),
        c_mu=float(c_mu),
        d_sigma=float(d_sigma),
    )


def chi_mean(dim: int) -> float:
    """Approximate E||N(0, I_D)|| = sqrt(D) * (1 - 1/(4D) + 1/(21 D^2))."""
    if dim < 1:
        raise ValueError("dim must be positive")
    return math.sqrt(dim) * (1.0 - 1.0 / (4.0 * dim) + 1.0 / (21.0 * dim**2))


def _symmetrize(m: np.ndarray) -> np.ndarray:
    return 0.5 * (m + m.T)


def floored_eigh(m: np.ndarray, floor: float = EIG_FLOOR) -> tuple[np.ndarray, np.ndarray]:
    """Eigendecomposition of a symmetric matrix with eigenvalues floored."""
    vals, vecs = np.linalg.eigh(_symmetrize(m))
    if not np.all(np.isfinite(vals)):
        raise NumericalBlowup("non-finite eigenvalues")
    return np.maximum(vals, floor), vecs


def inverse_sqrt_spd(m: np.ndarray) -> np.ndarray:
    vals, vecs = floored_eigh(m)
    return (vecs * (vals**-0.5)) @ vecs.T


def repair_covariance(m: np.ndarray, floor: float = EIG_FLOOR) -> np.ndarray:
    """Symmetrize and floor eigenvalues so the matrix stays usable as a shape."""
    vals, vecs = floored_eigh(m, floor)
    return _symmetrize((vecs * vals) @ vecs.T)


def cholesky_factor(state: DistributionState) -> np.ndarray:
    """Lower Cholesky factor of C; raises NumericalBlowup when degenerate."""
    try:
        factor = np.linalg.cholesky(state.C)
    except np.linalg.LinAlgError as exc:
        raise NumericalBlowup(f"covariance not positive definite: {exc}") from exc
    if not np.all(np.isfinite(factor)):
        raise NumericalBlowup("non-finite Cholesky factor")
    return factor


def sample_truncated_point(
    mu: np.ndarray,
    sigma: float,
    chol: np.ndarray,
    rng: np.random.Generator,
    max_tries: int = 1000,
) -> np.ndarray:
    """One draw from N(mu, sigma^2 C) kept inside [0,1]^D.

    Rejection with up to ``max_tries`` redraws; the final draw is clamped to
    the boundary if all rejections fail.
    """
    dim = len(mu)
    x = mu
    for _ in range(max_tries):
        x = mu + sigma * (chol @ rng.standard_normal(dim))
        if np.all((x >= 0.0) & (x <= 1.0)):
            return x
    return np.clip(x, 0.0, 1.0)


def sample_population(
    state: DistributionState, config: PopulationConfig, rng: np.random.Generator
) -> np.ndarray:
    """M independent truncated draws from the current distribution, shape (M, D)."""
    chol = cholesky_factor(state)
    return np.array(
        [sample_truncated_point(state.mu, state.sigma, chol, rng) for _ in range(config.m_samples)]
    )


def select_best(points: np.ndarray, values: np.ndarray, k: int) -> np.ndarray:
    """The K lowest-value points, ascending; ties keep original sample order."""
    points = np.asarray(points, dtype=float)
    values = np.asarray(values, dtype=float)
    if len(points) != len(values) or len(points) < k:
        raise ValueError("need len(points) == len(values) >= k")
    order = np.argsort(values, kind="stable")
    return points[order[:k]].copy()


def cma_update(
    state: DistributionState, selected: np.ndarray, hp: CmaHyperparams
) -> DistributionState:
    """One full distribution update from K points ordered by ascending value.

    Steps, in order: normalize samples against the previous mean, form the
    weighted average direction, move the mean, update the conjugate path
    (whitened by C^(-1/2)), rescale sigma against the expected norm of a
    standard normal, gate the shape-path update by the stall indicator, and
    recombine C from its decayed self, the rank-one path term and the
    weighted rank-K sample term. C is then symmetrized and eigenvalue-floored.
    """
    x = np.asarray(selected, dtype=float)
    k, dim = x.shape
    if hp.weights.shape != (k,):
        raise ValueError("hyperparameter weights do not match selection size")
    w = hp.weights

    z = (x - state.mu) / state.sigma
    z_mean = w @ z
    mu_new = w @ x

    c_inv_sqrt = inverse_sqrt_spd(state.C)
    p_sigma = (1.0 - hp.c_sigma) * state.p_sigma + math.sqrt(
        hp.c_sigma * (2.0 - hp.c_sigma) * hp.mu_eff
    ) * (c_inv_sqrt @ z_mean)

    chi = chi_mean(dim)
    p_sigma_norm = float(np.linalg.norm(p_sigma))
    sigma_new = state.sigma * math.exp(hp.c_sigma / hp.d_sigma * (p_sigma_norm / chi - 1.0))

    # Stall indicator: freeze the rank-one path while sigma is still inflating.
    debias = math.sqrt(1.0 - (1.0 - hp.c_sigma) ** (2 * (state.generation + 1)))
    h_sigma = 1.0 if p_sigma_norm / debias < (1.4 + 2.0 / (dim + 1.0)) * chi else 0.0

    p_c = (1.0 - hp.c_c) * state.p_c + h_sigma * math.sqrt(
        hp.c_c * (2.0 - hp.c_c) * hp.mu_eff
    ) * z_mean

    delta = (1.0 - h_sigma) * hp.c_c * (2.0 - hp.c_c)
    c_new = (
        (1.0 + hp.c_1 * delta - hp.c_1 - hp.c_mu * w.sum()) * state.C
        + hp.c_1 * np.outer(p_c, p_c)
        + hp.c_mu * (z.T * w) @ z
    )
    for arr in (mu_new, p_sigma, p_c, c_new):
        if not np.all(np.isfinite(arr)):
            raise NumericalBlowup("non-finite intermediate in distribution update")
    if not math.isfinite(sigma_new):
        raise NumericalBlowup("non-finite step size")
    c_new = repair_covariance(c_new)

    return DistributionState(
        mu=mu_new,
        C=c_new,
        sigma=sigma_new,
        p_c=p_c,
        p_sigma=p_sigma,
        generation=state.generation + 1,
    )


def run_cmaes(
    spec: ObjectiveSpec,
    opt: OptimumRecord,
    rng: np.random.Generator,
    budget: int,
    eps: float = 0.01,
    eps_sigma: float = 0.01,
    sigma0: float = 0.5,
    pop: PopulationConfig | None = None,
) -> TrialRecord:
    """Standalone evolution-strategy trial on the scaled unit cube.

    Starts from a uniform-random mean with identity shape, loops
    sample/select/update, and ends Global on an eps-hit, Local once sigma
    drops below ``eps_sigma`` (or on a numerical failure, flagged), Budget
    once classical evaluations pass ``budget``.
    """
    dim = spec.dimension
    pop = pop or default_population(dim)
    hp = default_hyperparams(dim, pop.k_best)
    counter = OracleCounter()
    tracker = TrialTracker(spec, opt, eps, counter, budget)
    state = DistributionState.initial(rng.uniform(size=dim), sigma0)

    def record(outcome: Outcome, failure: str | None = None) -> TrialRecord:
        return TrialRecord(
            outcome=outcome,
            quantum_calls=0,
            classical_evals=counter.classical_evals,
            generations=state.generation,
            best_value_trace=tracker.trace,
            final_state=state.to_dict(),
            failure=failure,
        )

    try:
        tracker.eval_classical(state.mu)
        while True:
            if state.sigma < eps_sigma:
                return record(Outcome.LOCAL)
            points = sample_population(state, pop, rng)
            values = np.array([tracker.eval_classical(p) for p in points])
            state = cma_update(state, select_best(points, values, pop.k_best), hp)
    except GlobalHitFound:
        return record(Outcome.GLOBAL)
    except BudgetExhausted:
        return record(Outcome.BUDGET)
    except NumericalBlowup as exc:
        return record(Outcome.LOCAL, failure=str(exc))
