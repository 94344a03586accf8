"""Benchmark functions, unit-cube scaling, fixed-point grids and optimum bookkeeping.

Every optimizer in this package works on the scaled unit cube [0, 1]^D; the
raw benchmark formulas keep their published domains and are evaluated through
an affine unscaling. Grids discretize the cube into 2^(D*tau) cells addressed
by a single integer index (dimension-major, dimension 0 in the most
significant tau bits); grid coordinates are cell midpoints, so no grid point
ever sits on the domain boundary.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

# Refuse exhaustive scans / statevectors above this many grid points.
MAX_SCAN_POINTS = 2**26


class GridTooLarge(Exception):
    """Grid has more points than the configured exhaustive-scan/memory cap."""


@dataclass(eq=False)
class ObjectiveSpec:
    """A named test function on the scaled unit cube.

    ``raw_fn`` takes raw-coordinate arrays of shape (..., D) and returns
    values of shape (...); scaling to [0, 1]^D is handled here.
    """

    name: str
    dimension: int
    raw_lower: np.ndarray
    raw_upper: np.ndarray
    raw_fn: Callable[[np.ndarray], np.ndarray]

    def __post_init__(self):
        self.raw_lower = np.asarray(self.raw_lower, dtype=float)
        self.raw_upper = np.asarray(self.raw_upper, dtype=float)
        if self.raw_lower.shape != (self.dimension,) or self.raw_upper.shape != (self.dimension,):
            raise ValueError("bounds must have shape (dimension,)")
        if not np.all(self.raw_lower < self.raw_upper):
            raise ValueError(f"{self.name}: raw_lower must be strictly below raw_upper")

    def unscale(self, x: np.ndarray) -> np.ndarray:
        """Map scaled points in [0,1]^D to raw coordinates."""
        return self.raw_lower + np.asarray(x, dtype=float) * (self.raw_upper - self.raw_lower)

    def evaluate_scaled(self, x: np.ndarray) -> np.ndarray:
        return self.raw_fn(self.unscale(x))

    def descriptor(self) -> dict:
        """JSON-friendly description (name, domain, dimension)."""
        return {
            "name": self.name,
            "dimension": self.dimension,
            "raw_lower": self.raw_lower.tolist(),
            "raw_upper": self.raw_upper.tolist(),
        }


@dataclass(frozen=True)
class Grid:
    """Fixed-point discretization: ``dim`` dimensions times ``bits`` bits each."""

    dim: int
    bits: int

    def __post_init__(self):
        if self.dim < 1 or self.bits < 1:
            raise ValueError("dim and bits must be positive")

    @property
    def points_per_dim(self) -> int:
        return 1 << self.bits

    @property
    def total_points(self) -> int:
        # Python int: may exceed 64 bits for large dim*bits.
        return 1 << (self.dim * self.bits)


@dataclass(frozen=True)
class OptimumRecord:
    """Grid-global optimum of an objective: index, scaled point and value."""

    argmin_index: int
    argmin_scaled: np.ndarray
    min_value: float


def evaluate(spec: ObjectiveSpec, x: np.ndarray) -> float:
    """Objective value at one scaled point in [0,1]^D."""
    return float(spec.evaluate_scaled(np.asarray(x, dtype=float)))


def index_to_point(grid: Grid, j: int) -> np.ndarray:
    """Scaled coordinates (cell midpoints) of grid index ``j``."""
    j = int(j)
    if not 0 <= j < grid.total_points:
        raise IndexError(f"grid index {j} out of range [0, {grid.total_points})")
    mask = grid.points_per_dim - 1
    out = np.empty(grid.dim)
    for d in range(grid.dim):
        digit = (j >> ((grid.dim - 1 - d) * grid.bits)) & mask
        out[d] = (digit + 0.5) / grid.points_per_dim
    return out


def point_to_index(grid: Grid, x: np.ndarray) -> int:
    """Index of the grid cell containing scaled point ``x`` (nearest midpoint)."""
    x = np.asarray(x, dtype=float)
    if x.shape != (grid.dim,):
        raise ValueError("point dimension does not match grid")
    digits = np.clip(np.floor(x * grid.points_per_dim).astype(np.int64), 0, grid.points_per_dim - 1)
    j = 0
    for d in range(grid.dim):
        j = (j << grid.bits) | int(digits[d])
    return j


def snap_to_grid(grid: Grid, x: np.ndarray) -> np.ndarray:
    """Nearest grid point (cell midpoint) to scaled point ``x``.

    Works without flat indices, so it is usable on grids whose total point
    count exceeds 64 bits.
    """
    x = np.asarray(x, dtype=float)
    digits = np.clip(np.floor(x * grid.points_per_dim), 0, grid.points_per_dim - 1)
    return (digits + 0.5) / grid.points_per_dim


def batch_points(grid: Grid, start: int, stop: int) -> np.ndarray:
    """Scaled coordinates for the contiguous index range [start, stop)."""
    idx = np.arange(start, stop, dtype=np.int64)
    pts = np.empty((stop - start, grid.dim))
    mask = grid.points_per_dim - 1
    for d in range(grid.dim):
        digits = (idx >> ((grid.dim - 1 - d) * grid.bits)) & mask
        pts[:, d] = (digits + 0.5) / grid.points_per_dim
    return pts


_VALUE_CACHE: dict[tuple[str, int, int], np.ndarray] = {}
_CHUNK = 1 << 20


def grid_values(spec: ObjectiveSpec, grid: Grid, max_points: int = MAX_SCAN_POINTS) -> np.ndarray:
    """Objective values at every grid point, cached per (name, D, bits).

    Registry names identify functions, so a cached entry is reused whenever
    the same named objective meets the same grid again.
    """
    if grid.dim != spec.dimension:
        raise ValueError("grid dimension does not match objective")
    n = grid.total_points
    if n > max_points:
        raise GridTooLarge(f"{n} grid points exceed cap {max_points}")
    key = (spec.name, spec.dimension, grid.bits)
    cached = _VALUE_CACHE.get(key)
    if cached is not None:
        return cached
    values = np.empty(n)
    for start in range(0, n, _CHUNK):
        stop = min(start + _CHUNK, n)
        values[start:stop] = spec.evaluate_scaled(batch_points(grid, start, stop))
    _VALUE_CACHE[key] = values
    return values


def locate_global_optimum(
    spec: ObjectiveSpec, grid: Grid, max_points: int = MAX_SCAN_POINTS
) -> OptimumRecord:
    """Exhaustive scan over all grid points; ties broken by smallest index."""
    values = grid_values(spec, grid, max_points=max_points)
    j = int(np.argmin(values))  # argmin returns the first minimizer
    return OptimumRecord(
        argmin_index=j,
        argmin_scaled=index_to_point(grid, j),
        min_value=float(values[j]),
    )


def is_global_hit(x: np.ndarray, opt: OptimumRecord, eps: float) -> bool:
    """True iff ``x`` lies in the closed Euclidean eps-ball of the grid argmin."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    return float(np.linalg.norm(np.asarray(x, dtype=float) - opt.argmin_scaled)) <= eps


def coordinate_refined_optimum(
    spec: ObjectiveSpec, grid: Grid, guess: np.ndarray, sweeps: int = 4
) -> OptimumRecord:
    """Grid optimum via per-dimension scans from a scaled starting guess.

    Each sweep scans every digit of one dimension at a time while the others
    stay fixed (ties to the smaller digit), which is exact for separable
    objectives and converges onto symmetric smooth basins; used where the
    grid is too large for the exhaustive scan.
    """
    ppd = grid.points_per_dim
    digits = np.clip(np.floor(np.asarray(guess, dtype=float) * ppd), 0, ppd - 1).astype(np.int64)
    coords_1d = (np.arange(ppd) + 0.5) / ppd
    for _ in range(sweeps):
        moved = False
        for d in range(grid.dim):
            pts = np.tile((digits + 0.5) / ppd, (ppd, 1))
            pts[:, d] = coords_1d
            best = int(np.argmin(spec.evaluate_scaled(pts)))
            if best != digits[d]:
                digits[d] = best
                moved = True
        if not moved:
            break
    point = (digits + 0.5) / ppd
    j = 0
    for d in range(grid.dim):
        j = (j << grid.bits) | int(digits[d])
    return OptimumRecord(
        argmin_index=j,
        argmin_scaled=point,
        min_value=float(spec.evaluate_scaled(point)),
    )


def locate_optimum_auto(
    spec: ObjectiveSpec, grid: Grid, max_points: int = MAX_SCAN_POINTS
) -> OptimumRecord:
    """Exhaustive scan when the grid fits under the cap, else coordinate
    refinement seeded from the known per-dimension minimizer of the builtin."""
    if grid.total_points <= max_points:
        return locate_global_optimum(spec, grid, max_points=max_points)
    if spec.name not in _RAW_ARGMIN_1D:
        raise GridTooLarge(
            f"grid too large to scan and no known minimizer for {spec.name!r}"
        )
    raw = np.full(spec.dimension, _RAW_ARGMIN_1D[spec.name])
    guess = (raw - spec.raw_lower) / (spec.raw_upper - spec.raw_lower)
    return coordinate_refined_optimum(spec, grid, guess)


# ---------------------------------------------------------------------------
# Built-in benchmark functions. Formulas follow the published variants used
# throughout this package (no normalizing offsets): griewank keeps the
# cos(sqrt(.)) oscillation (|x| inside the root keeps it real on the negative
# half-domain), schwefel and ackley carry no additive constants.
# ---------------------------------------------------------------------------


def _rastrigin(x: np.ndarray) -> np.ndarray:
    return np.sum(x**2 - 10.0 * np.cos(2.0 * np.pi * x), axis=-1)


def _ackley(x: np.ndarray) -> np.ndarray:
    d = x.shape[-1]
    rms = np.sqrt(np.sum(x**2, axis=-1) / d)
    return -20.0 * np.exp(-0.2 * rms) - np.exp(np.sum(np.cos(2.0 * np.pi * x), axis=-1) / d)


def _styblinski_tang(x: np.ndarray) -> np.ndarray:
    return 0.5 * np.sum(x**4 - 16.0 * x**2 + 5.0 * x, axis=-1)


def _schwefel(x: np.ndarray) -> np.ndarray:
    return np.sum(x * np.sin(np.sqrt(np.abs(x))), axis=-1)


def _griewank(x: np.ndarray) -> np.ndarray:
    return np.sum(x**2, axis=-1) / 4000.0 - np.prod(np.cos(np.sqrt(np.abs(x))), axis=-1)


def _alpine01(x: np.ndarray) -> np.ndarray:
    return np.sum(np.abs(x * np.sin(x) + 0.1 * x), axis=-1)


def _alpine02(x: np.ndarray) -> np.ndarray:
    return -np.prod(np.sqrt(x) * np.sin(x), axis=-1)


def _deflected_corrugated_spring(x: np.ndarray) -> np.ndarray:
    r = np.sqrt(np.sum(x**2, axis=-1))
    return 0.1 * (np.sum(x**2, axis=-1) - x.shape[-1] * np.cos(5.0 * r))


def _wavy(x: np.ndarray) -> np.ndarray:
    return -np.sum(np.cos(10.0 * x) * np.exp(-(x**2) / 2.0), axis=-1)


_BUILTINS: dict[str, tuple[Callable[[np.ndarray], np.ndarray], float, float]] = {
    "rastrigin": (_rastrigin, -5.12, 5.12),
    "ackley": (_ackley, -4.0, 4.0),
    "styblinski_tang": (_styblinski_tang, -5.0, 5.0),
    "schwefel": (_schwefel, -500.0, 500.0),
    "griewank": (_griewank, -512.0, 512.0),
    "alpine01": (_alpine01, -10.0, 10.0),
    "alpine02": (_alpine02, 0.0, 10.0),
    "deflected_corrugated_spring": (_deflected_corrugated_spring, 0.0, 10.0),
    "wavy": (_wavy, -np.pi, np.pi),
}

# Per-dimension raw minimizers of the builtins (all have identical optimal
# coordinates in every dimension); seeds for coordinate refinement on grids
# too large to scan. alpine01 attains value zero on a whole lattice of points,
# the origin is the canonical one.
_RAW_ARGMIN_1D: dict[str, float] = {
    "rastrigin": 0.0,
    "ackley": 0.0,
    "styblinski_tang": -2.903534018185960,
    "schwefel": -420.9687462275036,
    "griewank": 0.0,
    "alpine01": 0.0,
    "alpine02": 7.917052698245946,
    "deflected_corrugated_spring": 0.0,
    "wavy": 0.0,
}

_EXTENSIONS: dict[str, Callable[[int], ObjectiveSpec]] = {}


def register_function(name: str, factory: Callable[[int], ObjectiveSpec]) -> None:
    """In-process extension point: ``factory(D)`` must return an ObjectiveSpec."""
    if name in _BUILTINS:
        raise ValueError(f"cannot shadow built-in function {name!r}")
    _EXTENSIONS[name] = factory


def function_names() -> list[str]:
    return sorted(list(_BUILTINS) + list(_EXTENSIONS))


def get_objective(name: str, dimension: int) -> ObjectiveSpec:
    """Look up a benchmark by registry name at the requested dimension."""
    if dimension < 1:
        raise ValueError("dimension must be positive")
    if name in _BUILTINS:
        fn, lo, hi = _BUILTINS[name]
        return ObjectiveSpec(
            name=name,
            dimension=dimension,
            raw_lower=np.full(dimension, lo),
            raw_upper=np.full(dimension, hi),
            raw_fn=fn,
        )
    if name in _EXTENSIONS:
        return _EXTENSIONS[name](dimension)
    raise KeyError(f"unknown benchmark function {name!r}; known: {function_names()}")
