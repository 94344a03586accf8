"""Shared per-trial plumbing: oracle counters, outcomes, records, hit tracking.

Every optimizer in the package reports the same ``TrialRecord`` so the harness
can aggregate them uniformly. A quantum oracle call is one application of the
threshold sign-flip operator; a classical evaluation is one evaluation of the
objective on a concrete point. Combined cost is their sum.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .testbed import ObjectiveSpec, OptimumRecord, evaluate, is_global_hit


class Outcome(str, enum.Enum):
    GLOBAL = "global"
    LOCAL = "local"
    BUDGET = "budget"


class BudgetExhausted(Exception):
    """Combined oracle-call budget exceeded mid-trial."""


class GlobalHitFound(Exception):
    """Control-flow signal: an evaluated point landed in the target eps-ball."""

    def __init__(self, point: np.ndarray, value: float):
        super().__init__(f"global hit at value {value}")
        self.point = point
        self.value = value


@dataclass
class OracleCounter:
    quantum_calls: int = 0
    classical_evals: int = 0

    def total(self) -> int:
        return self.quantum_calls + self.classical_evals


@dataclass
class TrialRecord:
    """Outcome and cost accounting of one optimization trial."""

    outcome: Outcome
    quantum_calls: int
    classical_evals: int
    generations: int
    best_value_trace: list[tuple[int, float]]  # (combined calls so far, best f so far)
    final_state: dict | None = None
    failure: str | None = None
    estimated_quantum_cost: float | None = None  # set by classical surrogates only

    @property
    def combined_calls(self) -> int:
        return self.quantum_calls + self.classical_evals

    def to_dict(self) -> dict:
        return {
            "outcome": self.outcome.value,
            "quantum_calls": self.quantum_calls,
            "classical_evals": self.classical_evals,
            "generations": self.generations,
            "best_value_trace": [[int(c), float(v)] for c, v in self.best_value_trace],
            "final_state": self.final_state,
            "failure": self.failure,
            "estimated_quantum_cost": self.estimated_quantum_cost,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TrialRecord":
        return cls(
            outcome=Outcome(d["outcome"]),
            quantum_calls=int(d["quantum_calls"]),
            classical_evals=int(d["classical_evals"]),
            generations=int(d["generations"]),
            best_value_trace=[(int(c), float(v)) for c, v in d["best_value_trace"]],
            final_state=d.get("final_state"),
            failure=d.get("failure"),
            estimated_quantum_cost=d.get("estimated_quantum_cost"),
        )


class TrialTracker:
    """Observes every evaluated point of a trial.

    Maintains the monotone best-value trace, raises ``GlobalHitFound`` the
    moment any observed point enters the closed eps-ball around the grid
    argmin, and (for classical evaluation paths) charges the counter and
    enforces the budget.
    """

    def __init__(
        self,
        spec: ObjectiveSpec,
        opt: OptimumRecord | None,
        eps: float,
        counter: OracleCounter,
        budget: int,
    ):
        self.spec = spec
        self.opt = opt
        self.eps = eps
        self.counter = counter
        self.budget = budget
        self.best = np.inf
        self.trace: list[tuple[int, float]] = []

    def observe(self, x: np.ndarray, value: float) -> None:
        """Record an already-charged evaluation; may raise GlobalHitFound."""
        if value < self.best:
            self.best = value
            self.trace.append((self.counter.total(), float(value)))
        if self.opt is not None and is_global_hit(x, self.opt, self.eps):
            raise GlobalHitFound(x, value)

    def eval_classical(self, x: np.ndarray) -> float:
        """Evaluate the objective at ``x``, charging one classical call.

        Raises GlobalHitFound on a hit and BudgetExhausted once the combined
        total passes the budget (hits win over budget on the same call).
        """
        value = evaluate(self.spec, x)
        self.counter.classical_evals += 1
        self.observe(x, value)
        if self.counter.total() > self.budget:
            raise BudgetExhausted(f"combined calls {self.counter.total()} > budget {self.budget}")
        return value
