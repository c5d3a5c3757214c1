"""Response-surface global optimization with RBF and Kriging surrogates."""

from .acquisition import (
    METHODS,
    RunConfig,
    StopRule,
    TargetCycle,
    Trace,
    choose_target_kriging,
    choose_target_rbf,
    next_point_kriging,
    next_point_rbf,
    run_optimization,
    transform_values,
)
from .core import (
    BoxDomain,
    DegenerateData,
    DuplicatePoint,
    GopError,
    NoNewPoint,
    NonFiniteValue,
    ObjectiveSpec,
    SampleSet,
    SingularSystem,
    TraceRecord,
    add_sample,
    fill_distance,
    latin_hypercube,
)
from .kriging import (
    KrigingModel,
    KrigingParams,
    concentrated_log_likelihood,
    expected_improvement,
    fit_kriging,
    kriging_model,
    predict_mean,
    predict_variance,
    probability_of_improvement,
)
from .problems import Problem, builtin_problems, expfit_inverse, get_problem
from .rbf import KernelKind, RbfModel, bumpiness, eval_rbf, fit_rbf, gutmann_utility, mu_coefficient, phi
from .solver import AuxSolver, maximize, minimize

__version__ = "0.1.0"
