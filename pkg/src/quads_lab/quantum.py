"""Exact amplitude-level simulation of threshold amplitude amplification.

States over a fixed-point grid are real vectors of length 2^(D*tau): the
initial state is either uniform or the square root of a discretized normal
density, and one search rotation is "flip the sign of every cell whose value
is below the threshold, then reflect about the initial state". Both operators
are real-orthogonal, so amplitudes stay real for the whole simulation and are
stored as float64.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .cma import floored_eigh
from .testbed import Grid, GridTooLarge, ObjectiveSpec, batch_points, grid_values, index_to_point
from .trials import BudgetExhausted, OracleCounter

# Hard default cap on statevector length (2^26 float64 amplitudes = 512 MiB).
MAX_AMPLITUDES = 2**26

NORM_TOL = 1e-9


@dataclass
class Statevector:
    """Real amplitude vector over all grid points, unit Euclidean norm."""

    amplitudes: np.ndarray
    grid: Grid

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def copy(self) -> "Statevector":
        return Statevector(self.amplitudes.copy(), self.grid)

    def probabilities(self) -> np.ndarray:
        return self.amplitudes**2


def _check_size(grid: Grid, max_amplitudes: int) -> int:
    n = grid.total_points
    if n > max_amplitudes:
        raise GridTooLarge(f"statevector of {n} amplitudes exceeds cap {max_amplitudes}")
    return n


def prepare_uniform_state(grid: Grid, max_amplitudes: int = MAX_AMPLITUDES) -> Statevector:
    """Equal positive amplitude 2^(-D*tau/2) on every grid point."""
    n = _check_size(grid, max_amplitudes)
    return Statevector(np.full(n, 1.0 / np.sqrt(n)), grid)


def prepare_gaussian_state(
    grid: Grid,
    mu: np.ndarray,
    cov: np.ndarray,
    max_amplitudes: int = MAX_AMPLITUDES,
) -> Statevector:
    """Amplitudes proportional to sqrt of the N(mu, cov) density at each cell.

    ``cov`` is inverted through a symmetric eigendecomposition with a 1e-12
    eigenvalue floor; the quadratic form is shifted by its minimum before
    exponentiation so arbitrarily tight covariances stay finite.
    """
    n = _check_size(grid, max_amplitudes)
    mu = np.asarray(mu, dtype=float)
    vals, vecs = floored_eigh(np.asarray(cov, dtype=float))
    inv = (vecs / vals) @ vecs.T

    quad = np.empty(n)
    chunk = 1 << 20
    for start in range(0, n, chunk):
        stop = min(start + chunk, n)
        diff = batch_points(grid, start, stop) - mu
        quad[start:stop] = np.einsum("ij,jk,ik->i", diff, inv, diff)
    # amplitude = sqrt(exp(-quad/2)) up to normalization
    amps = np.exp(-0.25 * (quad - quad.min()))
    amps /= np.linalg.norm(amps)
    return Statevector(amps, grid)


def oracle_sign_flip(
    state: Statevector, spec: ObjectiveSpec, grid: Grid, theta: float
) -> Statevector:
    """Negate the amplitude of every cell with objective value strictly below theta."""
    values = grid_values(spec, grid)
    amps = state.amplitudes.copy()
    amps[values < theta] *= -1.0
    return Statevector(amps, grid)


def reflect_about_initial(state: Statevector, psi0: Statevector) -> Statevector:
    """Map state to 2 <state, psi0> psi0 - state (real inner product)."""
    overlap = float(np.dot(state.amplitudes, psi0.amplitudes))
    return Statevector(2.0 * overlap * psi0.amplitudes - state.amplitudes, state.grid)


def grover_power(
    psi0: Statevector,
    spec: ObjectiveSpec,
    grid: Grid,
    theta: float,
    rotations: int,
    counter: OracleCounter | None = None,
) -> Statevector:
    """Apply ``rotations`` search rotations (sign flip then reflection) to psi0.

    Each rotation charges one quantum oracle call to ``counter``. The norm is
    re-checked after every rotation.
    """
    if rotations < 0:
        raise ValueError("rotation count must be non-negative")
    values = grid_values(spec, grid)
    good = values < theta
    amps = psi0.amplitudes.copy()
    init = psi0.amplitudes
    for _ in range(rotations):
        amps[good] *= -1.0
        overlap = float(np.dot(amps, init))
        amps = 2.0 * overlap * init - amps
        norm = np.linalg.norm(amps)
        if abs(norm - 1.0) > NORM_TOL:
            raise FloatingPointError(f"statevector norm drifted to {norm}")
    if counter is not None:
        counter.quantum_calls += rotations
    return Statevector(amps, grid)


def measure(state: Statevector, rng: np.random.Generator) -> int:
    """Sample one grid index from the amplitude-squared distribution.

    Consumes exactly one uniform draw, so measurement sequences are
    reproducible under a fixed seed.
    """
    probs = state.probabilities()
    cum = np.cumsum(probs)
    u = rng.random() * cum[-1]
    j = int(np.searchsorted(cum, u, side="right"))
    return min(j, len(probs) - 1)


def aa_sample(
    psi0: Statevector,
    spec: ObjectiveSpec,
    grid: Grid,
    theta: float,
    growth: float,
    rng: np.random.Generator,
    counter: OracleCounter,
    budget: int,
    on_eval: Callable[[np.ndarray, float], None] | None = None,
    trace: Callable[[int, int, bool, float], None] | None = None,
) -> tuple[np.ndarray, float]:
    """Adaptive-rotation sampling of one point with value strictly below theta.

    Repeatedly picks a rotation count r uniformly from {0..floor(m)}, applies
    r rotations to psi0, measures, and verifies the measured cell classically
    (one classical call). On success returns (point, value); otherwise the
    rotation ceiling m grows by ``growth`` per attempt. Raises
    BudgetExhausted once combined calls pass ``budget``.

    ``on_eval`` sees every measured candidate (accepted or not) right after
    its verification evaluation; ``trace`` receives
    (attempt_index, r, accepted, theta) per attempt.
    """
    if not 1.0 < growth < 4.0 / 3.0:
        raise ValueError("growth rate must lie in (1, 4/3)")
    values = grid_values(spec, grid)
    m = 1.0
    attempt = 0
    while True:
        if counter.total() > budget:
            raise BudgetExhausted(f"combined calls {counter.total()} > budget {budget}")
        r = int(rng.integers(0, int(m) + 1))
        psi = grover_power(psi0, spec, grid, theta, r, counter)
        j = measure(psi, rng)
        x = index_to_point(grid, j)
        value = float(values[j])
        counter.classical_evals += 1
        accepted = value < theta
        if trace is not None:
            trace(attempt, r, accepted, theta)
        if on_eval is not None:
            on_eval(x, value)
        if accepted:
            return x, value
        if counter.total() > budget:
            raise BudgetExhausted(f"combined calls {counter.total()} > budget {budget}")
        m *= growth
        attempt += 1


def dump_statevector(state: Statevector, path: str) -> None:
    """Binary debug dump: uint64 little-endian length, then float64 LE amplitudes."""
    with open(path, "wb") as fh:
        fh.write(struct.pack("<Q", len(state.amplitudes)))
        fh.write(state.amplitudes.astype("<f8").tobytes())


def load_statevector(path: str, grid: Grid) -> Statevector:
    with open(path, "rb") as fh:
        (n,) = struct.unpack("<Q", fh.read(8))
        amps = np.frombuffer(fh.read(8 * n), dtype="<f8").copy()
    if n != grid.total_points:
        raise ValueError("dumped length does not match grid")
    return Statevector(amps, grid)
