"""Multistart compass search used for every inner optimization problem."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable, Optional, Sequence

import numpy as np

from .core import BoxDomain, NonFiniteValue, latin_hypercube


@dataclass(frozen=True)
class AuxSolver:
    """Settings of the multistart pattern search.

    :param n_starts: number of Latin hypercube start points.
    :param max_local_iters: poll steps allowed per local search.
    :param step_tolerance: local search stops once the step (relative to the
        box width) falls below this.
    :param seed: seed of the start design.
    """

    n_starts: int = 10
    max_local_iters: int = 200
    step_tolerance: float = 1e-6
    seed: int = 0

    def __post_init__(self):
        if self.n_starts < 1:
            raise ValueError("n_starts must be >= 1")
        if not self.step_tolerance > 0:
            raise ValueError("step_tolerance must be positive")

    @classmethod
    def default(cls, dim: int, seed: int = 0) -> "AuxSolver":
        return cls(n_starts=10 * dim, seed=seed)

    def reseeded(self, seed: int) -> "AuxSolver":
        return replace(self, seed=seed)


def _checked(fn: Callable[[np.ndarray], float]) -> Callable[[np.ndarray], float]:
    def wrapped(x):
        v = float(fn(x))
        if not math.isfinite(v):
            raise NonFiniteValue(f"objective returned {v} at {x}")
        return v

    return wrapped


def compass_search(fn, x0, fx0, lower, upper, max_iters, step_tolerance):
    """Coordinate pattern search from ``x0``; steps are fractions of the box width."""
    x = np.array(x0, dtype=float)
    fx = fx0
    width = upper - lower
    step = 0.25
    d = x.size
    for _ in range(max_iters):
        if step < step_tolerance:
            break
        improved = False
        for j in range(d):
            for sign in (1.0, -1.0):
                y = x.copy()
                y[j] = min(max(x[j] + sign * step * width[j], lower[j]), upper[j])
                if y[j] == x[j]:
                    continue
                fy = fn(y)
                if fy < fx:
                    x, fx = y, fy
                    improved = True
                    break
        if not improved:
            step *= 0.5
    return x, fx


def minimize(
    fn: Callable[[np.ndarray], float],
    domain: BoxDomain,
    solver: AuxSolver,
    extra_starts: Optional[Sequence] = None,
) -> tuple[np.ndarray, float]:
    """Minimize ``fn`` over ``domain`` by multistart compass search.

    ``extra_starts`` are polled before the Latin hypercube starts, so they win
    ties. The returned value never exceeds ``fn`` at any start point.

    :raises NonFiniteValue: if ``fn`` produces inf or nan anywhere it is probed.
    """
    fn = _checked(fn)
    starts = latin_hypercube(solver.n_starts, domain, solver.seed)
    if extra_starts is not None and len(extra_starts):
        extra = domain.clip(np.asarray(extra_starts, dtype=float).reshape(-1, domain.dim))
        starts = np.vstack([extra, starts])

    best_x, best_f = None, math.inf
    for x0 in starts:
        x, fx = compass_search(
            fn, x0, fn(x0), domain.lower, domain.upper,
            solver.max_local_iters, solver.step_tolerance,
        )
        if fx < best_f:
            best_x, best_f = x, fx
    return best_x, best_f


def maximize(fn, domain, solver, extra_starts=None) -> tuple[np.ndarray, float]:
    """Maximize ``fn``; the value is reported un-negated."""
    x, v = minimize(lambda z: -fn(z), domain, solver, extra_starts)
    return x, -v
