"""Outer response-surface loop: targets, next-point selection and stopping."""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Optional

import numpy as np

from .core import (
    BoxDomain,
    NoNewPoint,
    ObjectiveSpec,
    SampleSet,
    SingularSystem,
    TraceRecord,
    add_sample,
    latin_hypercube,
)
from .kriging import (
    KrigingModel,
    default_mle_solver,
    ei_from_moments,
    fit_kriging,
    kriging_model,
    pi_from_moments,
)
from .rbf import KernelKind, RbfModel, fit_rbf, utility_unit
from .solver import AuxSolver, minimize

log = logging.getLogger(__name__)

METHODS = ("rbf", "kriging_pi", "kriging_ei")
VALUE_TRANSFORMS = ("none", "median")
_CYCLE_MODES = {"rbf": "rbf_gutmann", "kriging_pi": "kriging_pi", "kriging_ei": "kriging_ei"}

# finite stand-in for +inf inside auxiliary searches
_BIG = 1e300
RETRIES = 3
# a surface minimizer this close (unit cube) to a sample is treated as that sample
_NODE_RADIUS = 1e-3


@dataclass
class TargetCycle:
    """Cyclic target schedule with weights ``(1 - k/N)^2``, ``k = 0..N``."""

    length: int = 5
    index: int = 0
    mode: str = "rbf_gutmann"

    def __post_init__(self):
        if self.length < 1:
            raise ValueError("cycle length must be >= 1")
        if not 0 <= self.index <= self.length:
            raise ValueError(f"cycle index must lie in [0, {self.length}]")

    @property
    def weight(self) -> float:
        return (1.0 - self.index / self.length) ** 2

    def advance(self) -> None:
        self.index = (self.index + 1) % (self.length + 1)


@dataclass(frozen=True)
class StopRule:
    """Stop when the budget is spent, the target is hit, or progress stalls.

    ``min_improvement`` compares the best value now with the best value
    ``window`` evaluations earlier.
    """

    max_evaluations: int
    target_value: Optional[float] = None
    min_improvement: Optional[float] = None
    window: int = 10

    def __post_init__(self):
        if self.max_evaluations < 1:
            raise ValueError("max_evaluations must be >= 1")
        if self.window < 1:
            raise ValueError("window must be >= 1")

    def reason(self, best_history: list[float]) -> Optional[str]:
        n = len(best_history)
        if n >= self.max_evaluations:
            return "budget_exhausted"
        if self.target_value is not None and best_history and best_history[-1] <= self.target_value:
            return "target_reached"
        if self.min_improvement is not None and n > self.window:
            if best_history[-1 - self.window] - best_history[-1] < self.min_improvement:
                return "stalled"
        return None


class Proposal(NamedTuple):
    point: np.ndarray
    target: Optional[float]
    score: float


def choose_target_rbf(s_min: float, f_values, cycle: TargetCycle) -> float:
    """Target ``f* = s_min - w_k (max f - s_min)``; equals ``s_min`` at ``k = N``."""
    spread = max(float(np.max(f_values)) - s_min, 0.0)
    return s_min - cycle.weight * spread


def choose_target_kriging(f_values, cycle: TargetCycle) -> float:
    """Target ``T = f_min - w_k (max f - f_min)`` for probability of improvement."""
    f_min = float(np.min(f_values))
    return f_min - cycle.weight * (float(np.max(f_values)) - f_min)


def transform_values(samples: SampleSet, kind: str = "median") -> SampleSet:
    """Copy of ``samples`` with values replaced for surface fitting.

    ``"median"`` caps every value at the sample median, so a few huge values
    cannot dominate the interpolant or the target spread. ``"none"`` returns
    ``samples`` unchanged.
    """
    if kind == "none" or len(samples) == 0:
        return samples
    if kind == "median":
        f = samples.values
        return SampleSet(samples.domain, samples.points, np.minimum(f, np.median(f)))
    raise ValueError(f"unknown value transform {kind!r}; choose from {VALUE_TRANSFORMS}")


def _seed(*parts: int) -> int:
    return int(np.random.SeedSequence([abs(int(p)) for p in parts]).generate_state(1)[0])


def _select(
    fn: Callable[[np.ndarray], float],
    samples: SampleSet,
    solver: AuxSolver,
    extra_starts=None,
) -> tuple[np.ndarray, float]:
    """Minimize ``fn`` over the unit cube, rejecting already-sampled points.

    Retries use fresh seeds and drop ``extra_starts``.
    """
    unit = BoxDomain.unit(samples.dim)
    tol = samples.domain.dup_tol
    for attempt in range(RETRIES + 1):
        s = solver if attempt == 0 else solver.reseeded(_seed(solver.seed, attempt))
        u, val = minimize(fn, unit, s, extra_starts if attempt == 0 else None)
        x = samples.domain.clip(samples.domain.from_unit(u))
        if samples.min_distance(x) > tol:
            return x, val
        log.debug("candidate %s duplicates a sample (attempt %d)", x, attempt)
    raise NoNewPoint(f"no new point after {RETRIES} restarts")


def _near_any(U: np.ndarray, u: np.ndarray, radius: float) -> bool:
    return bool(np.min(np.linalg.norm(U - u, axis=1)) <= radius)


def surface_minimum(samples: SampleSet, model: RbfModel, solver: AuxSolver) -> tuple[np.ndarray, float]:
    """Global minimum of the response surface, in unit-cube coordinates."""
    unit = BoxDomain.unit(samples.dim)
    i_best = int(np.argmin(samples.values))
    return minimize(model.eval_unit, unit, solver, extra_starts=model.unit_centers[i_best : i_best + 1])


def next_point_rbf(
    samples: SampleSet, model: RbfModel, cycle: TargetCycle, solver: AuxSolver
) -> Proposal:
    """Point minimizing the Gutmann utility at the cycle's target; advances ``cycle``.

    :raises NoNewPoint: if every restart only reproduces sampled points.
    """
    u_min, s_min = surface_minimum(samples, model, solver)
    f_star = choose_target_rbf(s_min, samples.values, cycle)
    U = model.unit_centers
    spread = float(np.max(samples.values)) - s_min
    if f_star == s_min and spread > 0 and _near_any(U, u_min, _NODE_RADIUS * math.sqrt(samples.dim)):
        # the surface bottoms out at a sample: a target equal to it carries no information
        f_star = s_min - 1e-2 * spread

    unit_tol = samples.domain.dup_tol / float(np.min(samples.domain.width))

    def utility(u):
        if _near_any(U, u, unit_tol):
            return _BIG
        g = float(utility_unit(model, u, f_star)[0])
        return g if math.isfinite(g) and g >= 0 else _BIG

    x, g = _select(utility, samples, solver, extra_starts=u_min[None, :])
    cycle.advance()
    return Proposal(x, f_star, g)


def next_point_kriging(
    samples: SampleSet, model: KrigingModel, cycle: TargetCycle, solver: AuxSolver
) -> Proposal:
    """Maximizer of PI (``cycle.mode == "kriging_pi"``) or EI; advances ``cycle``.

    :raises NoNewPoint: if every restart only reproduces sampled points.
    """
    f_min = float(np.min(samples.values))
    if cycle.mode == "kriging_pi":
        target = choose_target_kriging(samples.values, cycle)

        def score(u):
            mean, var = model.predict_unit(u)
            return float(pi_from_moments(mean, np.sqrt(var), target)[0])

    elif cycle.mode == "kriging_ei":
        target = None

        def score(u):
            mean, var = model.predict_unit(u)
            return float(ei_from_moments(mean, np.sqrt(var), f_min)[0])

    else:
        raise ValueError(f"cycle mode {cycle.mode!r} is not a Kriging mode")

    x, neg = _select(lambda u: -score(u), samples, solver)
    cycle.advance()
    return Proposal(x, target, -neg)


@dataclass(frozen=True)
class RunConfig:
    """Everything that determines a run; identical configs give identical traces.

    ``value_transform`` applies to the ``rbf`` method only.
    """

    method: str = "rbf"
    kernel: KernelKind = field(default_factory=lambda: KernelKind("cubic"))
    budget: int = 50
    seed: int = 0
    cycle_length: int = 5
    n_initial: Optional[int] = None
    target_value: Optional[float] = None
    min_improvement: Optional[float] = None
    window: int = 10
    value_transform: str = "median"
    problem: Optional[str] = None
    output_path: Optional[str] = None

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}; choose from {METHODS}")
        if self.cycle_length < 1:
            raise ValueError("cycle_length must be >= 1")
        if self.value_transform not in VALUE_TRANSFORMS:
            raise ValueError(f"unknown value_transform {self.value_transform!r}; choose from {VALUE_TRANSFORMS}")

    def initial_size(self, dim: int) -> int:
        return 2 * (dim + 1) if self.n_initial is None else self.n_initial

    def stop_rule(self) -> StopRule:
        return StopRule(self.budget, self.target_value, self.min_improvement, self.window)


@dataclass
class Trace:
    """Records of one run plus the reason it ended."""

    records: list[TraceRecord]
    status: str = "budget_exhausted"
    message: str = ""

    def __len__(self):
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def __getitem__(self, i):
        return self.records[i]

    @property
    def best_value(self) -> float:
        return self.records[-1].best_value

    @property
    def best_record(self) -> TraceRecord:
        # earliest record attaining the final best value
        return next(r for r in self.records if r.value == self.best_value)

    @property
    def evals_to_best(self) -> int:
        return self.best_record.iteration


# a full likelihood search every iteration up to this many samples
MLE_EVERY_ITERATION_UP_TO = 60
MLE_PERIOD = 5


def run_optimization(objective: ObjectiveSpec, config: RunConfig) -> Trace:
    """Evaluate a Latin hypercube design, then fit, propose and evaluate until stopped.

    A :class:`NoNewPoint` failure ends the run early with status ``"no_new_point"``.
    """
    domain = objective.domain
    d = domain.dim
    n0 = config.initial_size(d)
    if config.budget < n0:
        raise ValueError(f"budget {config.budget} is below the initial design size {n0}")
    stop = config.stop_rule()
    cycle = TargetCycle(config.cycle_length, 0, _CYCLE_MODES[config.method])

    samples = SampleSet(domain)
    records: list[TraceRecord] = []
    best_history: list[float] = []

    def record(x, fx, target, score, t0):
        best = fx if not best_history or fx < best_history[-1] else best_history[-1]
        best_history.append(best)
        records.append(
            TraceRecord(
                iteration=len(records) + 1,
                point=np.array(x, dtype=float),
                value=fx,
                best_value=best,
                target=target,
                acquisition_score=score,
                wall_time_ms=int(round(1000 * (time.perf_counter() - t0))),
            )
        )

    for x in latin_hypercube(n0, domain, config.seed):
        t0 = time.perf_counter()
        fx = objective(x)
        samples = add_sample(samples, x, fx)
        record(x, fx, None, None, t0)

    status, message = stop.reason(best_history), ""
    params = None
    iteration = 0
    while status is None:
        iteration += 1
        t0 = time.perf_counter()
        solver = AuxSolver.default(d, seed=_seed(config.seed, iteration))
        try:
            if config.method == "rbf":
                # the RBF surface and its targets see capped values; the trace keeps the true ones
                fitted = transform_values(samples, config.value_transform)
                model = fit_rbf(fitted, config.kernel)
                prop = next_point_rbf(fitted, model, cycle, solver)
            else:
                n = len(samples)
                if params is None or n <= MLE_EVERY_ITERATION_UP_TO or iteration % MLE_PERIOD == 0:
                    mle = default_mle_solver(d, seed=_seed(config.seed, iteration, 1))
                    kmodel = fit_kriging(samples, solver=mle)
                    params = kmodel.params
                else:
                    kmodel = kriging_model(samples, params)
                prop = next_point_kriging(samples, kmodel, cycle, solver)
        except NoNewPoint as exc:
            status, message = "no_new_point", str(exc)
            break
        except SingularSystem as exc:
            status, message = "singular_system", str(exc)
            break
        fx = objective(prop.point)
        samples = add_sample(samples, prop.point, fx)
        record(prop.point, fx, prop.target, prop.score, t0)
        log.info(
            "eval %d f=%.6g best=%.6g target=%s",
            len(records), fx, best_history[-1],
            "-" if prop.target is None else f"{prop.target:.6g}",
        )
        status = stop.reason(best_history)
    return Trace(records, status, message)
