"""Domain geometry, sample bookkeeping, run traces and space-filling designs."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.spatial import cKDTree


class GopError(Exception):
    """Base class for errors raised by this package."""


class DuplicatePoint(GopError):
    """A point coincides (within tolerance) with an existing sample."""


class SingularSystem(GopError):
    """An interpolation or correlation system is numerically singular."""


class DegenerateData(GopError):
    """The data carry no variation, so the likelihood is unbounded."""


class NoNewPoint(GopError):
    """The auxiliary search only produced points already sampled."""


class NonFiniteValue(GopError):
    """An auxiliary objective returned inf or nan."""


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class BoxDomain:
    """Axis-aligned box ``[lower, upper]`` in R^d."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lower = _frozen(np.atleast_1d(self.lower))
        upper = _frozen(np.atleast_1d(self.upper))
        if lower.ndim != 1 or lower.shape != upper.shape or lower.size < 1:
            raise ValueError("lower and upper must be 1-d vectors of equal length >= 1")
        if not np.all(lower < upper):
            raise ValueError(f"need lower < upper componentwise, got {lower} and {upper}")
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)

    @classmethod
    def unit(cls, dim: int) -> "BoxDomain":
        return cls(np.zeros(dim), np.ones(dim))

    @property
    def dim(self) -> int:
        return self.lower.size

    @property
    def width(self) -> np.ndarray:
        return self.upper - self.lower

    @property
    def diameter(self) -> float:
        return float(np.linalg.norm(self.width))

    @property
    def dup_tol(self) -> float:
        """Distance under which two points count as the same sample."""
        return 1e-9 * self.diameter

    def contains(self, x) -> bool:
        x = np.asarray(x, dtype=float)
        return bool(np.all(x >= self.lower) and np.all(x <= self.upper))

    def to_unit(self, x) -> np.ndarray:
        return (np.asarray(x, dtype=float) - self.lower) / self.width

    def from_unit(self, u) -> np.ndarray:
        return self.lower + np.asarray(u, dtype=float) * self.width

    def clip(self, x) -> np.ndarray:
        return np.clip(x, self.lower, self.upper)

    def __eq__(self, other):
        if not isinstance(other, BoxDomain):
            return NotImplemented
        return np.array_equal(self.lower, other.lower) and np.array_equal(self.upper, other.upper)

    def __hash__(self):
        return hash((self.lower.tobytes(), self.upper.tobytes()))


@dataclass(frozen=True, eq=False)
class SampleSet:
    """Evaluated points and their objective values.

    Instances are immutable; :func:`add_sample` returns a new set.
    """

    domain: BoxDomain
    points: np.ndarray = None
    values: np.ndarray = None

    def __post_init__(self):
        d = self.domain.dim
        pts = np.empty((0, d)) if self.points is None else np.asarray(self.points, dtype=float)
        vals = np.empty(0) if self.values is None else np.asarray(self.values, dtype=float)
        pts = pts.reshape(-1, d)
        vals = vals.reshape(-1)
        if pts.shape[0] != vals.size:
            raise ValueError(f"{pts.shape[0]} points but {vals.size} values")
        for x in pts:
            if not self.domain.contains(x):
                raise ValueError(f"point {x} outside the domain")
        object.__setattr__(self, "points", _frozen(pts))
        object.__setattr__(self, "values", _frozen(vals))

    def __len__(self) -> int:
        return self.values.size

    @property
    def dim(self) -> int:
        return self.domain.dim

    @property
    def unit_points(self) -> np.ndarray:
        return self.domain.to_unit(self.points)

    def min_distance(self, x) -> float:
        """Euclidean distance from ``x`` to the closest sample (inf if empty)."""
        if len(self) == 0:
            return math.inf
        return float(np.min(np.linalg.norm(self.points - np.asarray(x, dtype=float), axis=1)))

    def best(self) -> tuple[np.ndarray, float]:
        """Point with the lowest value; ties go to the earliest sample."""
        i = int(np.argmin(self.values))
        return self.points[i].copy(), float(self.values[i])


def add_sample(samples: SampleSet, x, fx: float) -> SampleSet:
    """Return a new sample set with ``(x, fx)`` appended.

    :raises ValueError: if ``x`` lies outside the domain.
    :raises DuplicatePoint: if ``x`` is within ``domain.dup_tol`` of a sample.
    """
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.size != samples.dim:
        raise ValueError(f"expected a {samples.dim}-vector, got shape {x.shape}")
    if not samples.domain.contains(x):
        raise ValueError(f"point {x} outside the domain")
    if samples.min_distance(x) <= samples.domain.dup_tol:
        raise DuplicatePoint(f"{x} duplicates an existing sample")
    return SampleSet(
        samples.domain,
        np.vstack([samples.points, x]),
        np.append(samples.values, float(fx)),
    )


def latin_hypercube(n: int, domain: BoxDomain, seed: int) -> np.ndarray:
    """Random Latin hypercube design of ``n`` points in ``domain``.

    Each coordinate has exactly one value in each of the ``n`` equal-width
    strata of its interval.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = np.random.default_rng(seed)
    d = domain.dim
    strata = np.column_stack([rng.permutation(n) for _ in range(d)])
    u = (strata + rng.random((n, d))) / n
    return domain.from_unit(u)


def fill_distance(samples: SampleSet, domain: BoxDomain, grid_resolution: int = 101) -> float:
    """Largest distance from a regular probe grid to the nearest sample."""
    if len(samples) == 0:
        raise ValueError("fill distance of an empty sample set is undefined")
    axes = [np.linspace(lo, hi, grid_resolution) for lo, hi in zip(domain.lower, domain.upper)]
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, domain.dim)
    dist, _ = cKDTree(samples.points).query(grid)
    return float(np.max(dist))


@dataclass(frozen=True)
class ObjectiveSpec:
    """A deterministic objective on a box; ``known_minimum`` is for testing."""

    evaluator: Callable[[np.ndarray], float]
    domain: BoxDomain
    known_minimum: Optional[float] = None

    def __call__(self, x) -> float:
        return float(self.evaluator(np.asarray(x, dtype=float)))


@dataclass(frozen=True)
class TraceRecord:
    iteration: int
    point: np.ndarray
    value: float
    best_value: float
    target: Optional[float] = None
    acquisition_score: Optional[float] = None
    wall_time_ms: int = 0
