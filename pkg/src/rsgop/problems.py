"""Benchmark objectives: multimodal test functions and an exponential-fit inverse problem."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import BoxDomain, ObjectiveSpec


@dataclass(frozen=True)
class Problem:
    name: str
    objective: ObjectiveSpec
    reference_minimum: Optional[tuple[np.ndarray, float]] = None
    description: str = ""

    @property
    def domain(self) -> BoxDomain:
        return self.objective.domain


def branin(x) -> float:
    x1, x2 = x
    b = 5.1 / (4 * math.pi**2)
    c = 5 / math.pi
    t = 1 / (8 * math.pi)
    return (x2 - b * x1**2 + c * x1 - 6) ** 2 + 10 * (1 - t) * math.cos(x1) + 10


def sixhump_camel(x) -> float:
    x1, x2 = x
    return (4 - 2.1 * x1**2 + x1**4 / 3) * x1**2 + x1 * x2 + (-4 + 4 * x2**2) * x2**2


def sphere(x) -> float:
    x = np.asarray(x, dtype=float)
    return float(x @ x)


def forrester(x) -> float:
    (t,) = x
    return (6 * t - 2) ** 2 * math.sin(12 * t - 4)


EXPFIT_TIMES = np.round(np.arange(21) * 0.1, 10)
EXPFIT_TRUE = (1.0, 0.5, 2.0, 3.0)


def expfit_forward(theta, t=EXPFIT_TIMES) -> np.ndarray:
    """Two-term exponential decay ``a1 exp(-b1 t) + a2 exp(-b2 t)``."""
    a1, b1, a2, b2 = theta
    return a1 * np.exp(-b1 * t) + a2 * np.exp(-b2 * t)


def expfit_inverse(
    a1: float = EXPFIT_TRUE[0],
    b1: float = EXPFIT_TRUE[1],
    a2: float = EXPFIT_TRUE[2],
    b2: float = EXPFIT_TRUE[3],
    noise: float = 0.0,
    seed: int = 0,
) -> Problem:
    """Least-squares identification of the four decay parameters on ``[0, 5]^4``.

    Data are the forward model at the true parameters plus optional uniform
    noise in ``[-noise, noise]``. The objective is invariant under swapping
    the two terms, so it has at least two global minimizers.
    """
    if not (b1 > 0 and b2 > 0 and b1 != b2):
        raise ValueError("need distinct positive decay rates")
    truth = np.array([a1, b1, a2, b2], dtype=float)
    y = expfit_forward(truth)
    if noise > 0:
        y = y + np.random.default_rng(seed).uniform(-noise, noise, y.size)
    y.setflags(write=False)

    def residual(theta) -> float:
        r = expfit_forward(np.asarray(theta, dtype=float)) - y
        return float(r @ r)

    domain = BoxDomain(np.zeros(4), np.full(4, 5.0))
    ref = (truth, 0.0) if noise == 0 else None
    return Problem(
        "expfit_inverse",
        ObjectiveSpec(residual, domain, 0.0 if noise == 0 else None),
        ref,
        "sum of squared residuals of a two-term exponential fit",
    )


def _sphere_problem(name: str, dim: int) -> Problem:
    domain = BoxDomain(np.full(dim, -5.12), np.full(dim, 5.12))
    return Problem(name, ObjectiveSpec(sphere, domain, 0.0), (np.zeros(dim), 0.0), f"sum of squares, d={dim}")


def builtin_problems(noise: float = 0.0, seed: int = 0) -> list[Problem]:
    """All named benchmark problems. ``noise`` only affects ``expfit_inverse``."""
    return [
        Problem(
            "branin",
            ObjectiveSpec(branin, BoxDomain([-5.0, 0.0], [10.0, 15.0]), 0.397887),
            (np.array([math.pi, 2.275]), 0.397887),
            "Branin-Hoo, three global minima",
        ),
        Problem(
            "sixhump_camel",
            ObjectiveSpec(sixhump_camel, BoxDomain([-3.0, -2.0], [3.0, 2.0]), -1.0316),
            (np.array([0.0898, -0.7126]), -1.0316),
            "six-hump camel back, two global minima",
        ),
        _sphere_problem("sphere", 2),
        _sphere_problem("sphere1", 1),
        _sphere_problem("sphere2", 2),
        _sphere_problem("sphere5", 5),
        Problem(
            "forrester",
            ObjectiveSpec(forrester, BoxDomain([0.0], [1.0]), -6.02074),
            (np.array([0.757249]), -6.02074),
            "one-dimensional multimodal test function",
        ),
        expfit_inverse(noise=noise, seed=seed),
    ]


def get_problem(name: str, noise: float = 0.0, seed: int = 0) -> Problem:
    for p in builtin_problems(noise, seed):
        if p.name == name:
            return p
    raise KeyError(name)
