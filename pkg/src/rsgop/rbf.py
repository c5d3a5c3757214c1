"""Radial basis function interpolation, bumpiness and the Gutmann utility.

Every surrogate here works in the unit cube of the sample set's domain, so
shape parameters and tolerances do not depend on problem units.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.linalg import LinAlgWarning, lu_factor, lu_solve
from scipy.spatial.distance import cdist

from .core import BoxDomain, DuplicatePoint, SampleSet, SingularSystem

KERNELS = ("linear", "cubic", "thin_plate_spline", "multiquadric", "gaussian")

# minimal polynomial degree that makes the augmented system solvable
_REQUIRED_DEGREE = {
    "linear": 0,
    "cubic": 1,
    "thin_plate_spline": 1,
    "multiquadric": 0,
    "gaussian": -1,
}

PIVOT_RATIO = 1e-12


@dataclass(frozen=True)
class KernelKind:
    """Radial function and polynomial tail degree.

    ``tail_degree`` defaults to the minimal degree for the kernel; a higher
    degree is accepted, a lower one is rejected.
    """

    name: str
    gamma: Optional[float] = None
    tail_degree: Optional[int] = None

    def __post_init__(self):
        name = {"tps": "thin_plate_spline", "mq": "multiquadric"}.get(self.name, self.name)
        if name not in _REQUIRED_DEGREE:
            raise ValueError(f"unknown kernel {self.name!r}; choose from {KERNELS}")
        object.__setattr__(self, "name", name)
        if name in ("multiquadric", "gaussian"):
            gamma = 1.0 if self.gamma is None else float(self.gamma)
            if not gamma > 0:
                raise ValueError(f"{name} kernel needs gamma > 0")
            object.__setattr__(self, "gamma", gamma)
        else:
            object.__setattr__(self, "gamma", None)
        required = _REQUIRED_DEGREE[name]
        degree = required if self.tail_degree is None else int(self.tail_degree)
        if degree < required or degree > 1:
            raise ValueError(f"{name} kernel needs tail degree in [{required}, 1], got {degree}")
        object.__setattr__(self, "tail_degree", degree)

    @property
    def sign(self) -> float:
        """Factor making the native-space quadratic form nonnegative."""
        return -1.0 if _REQUIRED_DEGREE[self.name] == 0 else 1.0

    def __str__(self):
        return self.name if self.gamma is None else f"{self.name}(gamma={self.gamma:g})"


def phi(kernel: KernelKind, r):
    """Radial function value(s) at distance(s) ``r >= 0``."""
    r = np.asarray(r, dtype=float)
    if np.any(r < 0):
        raise ValueError("radial distance must be nonnegative")
    name = kernel.name
    if name == "linear":
        out = r.copy()
    elif name == "cubic":
        out = r**3
    elif name == "thin_plate_spline":
        safe = np.where(r > 0, r, 1.0)
        out = np.where(r > 0, r**2 * np.log(safe), 0.0)
    elif name == "multiquadric":
        out = np.sqrt(r**2 + kernel.gamma**2)
    else:
        out = np.exp(-kernel.gamma * r**2)
    return float(out) if out.ndim == 0 else out


def n_monomials(degree: int, dim: int) -> int:
    return {-1: 0, 0: 1, 1: dim + 1}[degree]


def monomials(u: np.ndarray, degree: int) -> np.ndarray:
    """Tail basis {1} or {1, u_1, ..., u_d} evaluated at the rows of ``u``."""
    u = np.atleast_2d(u)
    if degree < 0:
        return np.empty((u.shape[0], 0))
    cols = [np.ones((u.shape[0], 1))]
    if degree >= 1:
        cols.append(u)
    return np.hstack(cols)


def _augmented(kernel: KernelKind, u: np.ndarray):
    n = u.shape[0]
    P = monomials(u, kernel.tail_degree)
    q = P.shape[1]
    Phi = phi(kernel, cdist(u, u)) if n else np.empty((0, 0))
    A = np.zeros((n + q, n + q))
    A[:n, :n] = Phi
    A[:n, n:] = P
    A[n:, :n] = P.T
    return A, Phi


def _factor(A: np.ndarray):
    with warnings.catch_warnings():
        # exact zero pivots are reported below as SingularSystem
        warnings.simplefilter("ignore", LinAlgWarning)
        lu, piv = lu_factor(A, check_finite=False)
    pivots = np.abs(np.diag(lu))
    if pivots.size == 0 or pivots.min() < PIVOT_RATIO * pivots.max():
        raise SingularSystem(
            f"pivot ratio {pivots.min() / max(pivots.max(), 1e-300):.3g} below {PIVOT_RATIO:g}"
        )
    return lu, piv


@dataclass(frozen=True, eq=False)
class RbfModel:
    """A fitted interpolant ``s(x) = sum_i weights_i phi(|x - x_i|) + p(x)``.

    ``tail_coeffs`` multiply the monomials of the unit-cube coordinates.
    """

    kernel: KernelKind
    domain: BoxDomain
    centers: np.ndarray
    values: np.ndarray
    weights: np.ndarray
    tail_coeffs: np.ndarray
    unit_centers: np.ndarray = field(repr=False)
    phi_matrix: np.ndarray = field(repr=False)
    _lu: tuple = field(repr=False)

    def __call__(self, x):
        return eval_rbf(self, x)

    def eval_unit(self, u):
        u = np.asarray(u, dtype=float)
        U = np.atleast_2d(u)
        s = phi(self.kernel, cdist(U, self.unit_centers)) @ self.weights
        s = s + monomials(U, self.kernel.tail_degree) @ self.tail_coeffs
        return float(s[0]) if u.ndim == 1 else s


def fit_rbf(samples: SampleSet, kernel: KernelKind) -> RbfModel:
    """Interpolate ``samples`` by solving the augmented symmetric system.

    :raises SingularSystem: if an LU pivot drops below ``1e-12`` times the
        largest pivot (coalescing points or too few points for the tail).
    """
    n = len(samples)
    if n == 0:
        raise ValueError("cannot fit an RBF to an empty sample set")
    u = samples.unit_points
    A, Phi = _augmented(kernel, u)
    lu = _factor(A)
    rhs = np.concatenate([samples.values, np.zeros(A.shape[0] - n)])
    sol = lu_solve(lu, rhs, check_finite=False)
    # one step of iterative refinement
    sol += lu_solve(lu, rhs - A @ sol, check_finite=False)
    return RbfModel(
        kernel=kernel,
        domain=samples.domain,
        centers=samples.points,
        values=samples.values,
        weights=sol[:n],
        tail_coeffs=sol[n:],
        unit_centers=u,
        phi_matrix=Phi,
        _lu=lu,
    )


def eval_rbf(model: RbfModel, x):
    """Evaluate the interpolant at ``x`` (a point or rows of points)."""
    return model.eval_unit(model.domain.to_unit(x))


def bumpiness(model: RbfModel) -> float:
    """Native-space seminorm ``sign * w^T Phi w`` of the interpolant."""
    w = model.weights
    b = model.kernel.sign * float(w @ model.phi_matrix @ w)
    if b < 0:
        if b < -1e-10:
            raise ArithmeticError(f"bumpiness {b} is negative beyond round-off")
        b = 0.0
    return b


def _check_new(samples: SampleSet, y: np.ndarray):
    if samples.min_distance(y) <= samples.domain.dup_tol:
        raise DuplicatePoint(f"{y} duplicates an existing sample")


def mu_coefficient(samples: SampleSet, kernel: KernelKind, y) -> float:
    """Weight of center ``y`` in the interpolant of zeros at the samples and one at ``y``.

    Solves the full extended system directly.
    """
    y = np.asarray(y, dtype=float).reshape(-1)
    _check_new(samples, y)
    u = np.vstack([samples.unit_points, samples.domain.to_unit(y)])
    A, _ = _augmented(kernel, u)
    rhs = np.zeros(A.shape[0])
    rhs[len(samples)] = 1.0
    return float(lu_solve(_factor(A), rhs, check_finite=False)[len(samples)])


def _extension_rows(model: RbfModel, U: np.ndarray) -> np.ndarray:
    k = model.kernel
    return np.hstack([phi(k, cdist(U, model.unit_centers)), monomials(U, k.tail_degree)])


def mu_from_model(model: RbfModel, u) -> np.ndarray:
    """Same coefficient as :func:`mu_coefficient`, for unit-cube rows ``u``.

    Uses the Schur complement of the extended system against the model's
    stored factorization, one O(n^2) solve per row.
    """
    b = _extension_rows(model, np.atleast_2d(u))
    return _mu(model, b)


def _mu(model: RbfModel, b: np.ndarray) -> np.ndarray:
    z = lu_solve(model._lu, b.T, check_finite=False)
    schur = phi(model.kernel, 0.0) - np.einsum("ij,ji->i", b, z)
    with np.errstate(divide="ignore"):
        return 1.0 / schur


def utility_unit(model: RbfModel, u, f_star: float) -> np.ndarray:
    """Unclamped ``sign * mu * (s - f_star)^2`` at unit-cube rows ``u``."""
    b = _extension_rows(model, np.atleast_2d(u))
    n = model.weights.size
    s = b[:, :n] @ model.weights + b[:, n:] @ model.tail_coeffs
    with np.errstate(invalid="ignore", over="ignore"):
        return model.kernel.sign * _mu(model, b) * (s - f_star) ** 2


def gutmann_utility(samples: SampleSet, model: RbfModel, y, f_star: float) -> float:
    """Bumpiness increase caused by forcing the interpolant through ``(y, f_star)``.

    ``g(y) = sign * mu(y) * (s(y) - f_star)^2``; adding this to
    ``bumpiness(model)`` gives the bumpiness of the extended fit.
    """
    y = np.asarray(y, dtype=float).reshape(-1)
    _check_new(samples, y)
    return max(float(utility_unit(model, samples.domain.to_unit(y), f_star)[0]), 0.0)
