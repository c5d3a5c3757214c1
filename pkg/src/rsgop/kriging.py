"""Kriging surrogate: power-exponential correlation, profiled likelihood, BLUP.

The random field has a constant mean and variance; both are profiled out of
the likelihood, leaving (theta, p) to be found by a global search.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.linalg.lapack import dpotrf, dpotrs
from scipy.special import erfc

from .core import BoxDomain, DegenerateData, SampleSet, SingularSystem
from .solver import AuxSolver, minimize

log = logging.getLogger(__name__)

JITTER_STEPS = (1e-10, 1e-9, 1e-8, 1e-7, 1e-6)
LOG10_THETA_BOUNDS = (-2.0, 3.0)
POWER_BOUNDS = (1.0, 2.0)


@dataclass(frozen=True)
class KrigingParams:
    """Per-coordinate correlation parameters ``theta_j >= 0`` and ``p_j in [1, 2]``."""

    theta: np.ndarray
    power: np.ndarray

    def __post_init__(self):
        theta = np.atleast_1d(np.asarray(self.theta, dtype=float))
        power = np.atleast_1d(np.asarray(self.power, dtype=float))
        if power.size == 1 and theta.size > 1:
            power = np.full(theta.size, power[0])
        if theta.shape != power.shape or theta.ndim != 1:
            raise ValueError("theta and power must be vectors of the same length")
        if np.any(theta < 0):
            raise ValueError("theta must be nonnegative")
        if np.any(power < 1) or np.any(power > 2):
            raise ValueError("power must lie in [1, 2]")
        theta.setflags(write=False)
        power.setflags(write=False)
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "power", power)

    @classmethod
    def isotropic(cls, theta: float, power: float, dim: int) -> "KrigingParams":
        return cls(np.full(dim, float(theta)), np.full(dim, float(power)))

    @property
    def dim(self) -> int:
        return self.theta.size


def correlation_matrix(params: KrigingParams, U, V) -> np.ndarray:
    U = np.atleast_2d(U)
    V = np.atleast_2d(V)
    diff = np.abs(U[:, None, :] - V[None, :, :])
    return np.exp(-np.sum(params.theta * diff**params.power, axis=-1))


def correlation(params: KrigingParams, u, v) -> float:
    """``exp(-sum_j theta_j |u_j - v_j|^p_j)``."""
    return float(correlation_matrix(params, np.ravel(u), np.ravel(v))[0, 0])


def normal_cdf(z):
    """Standard normal CDF through the complementary error function."""
    out = 0.5 * erfc(-np.asarray(z, dtype=float) / math.sqrt(2.0))
    return float(out) if np.ndim(out) == 0 else out


def normal_pdf(z):
    z = np.asarray(z, dtype=float)
    with np.errstate(over="ignore"):
        out = np.exp(-0.5 * z * z) / math.sqrt(2.0 * math.pi)
    return float(out) if out.ndim == 0 else out


def factor_correlation(R: np.ndarray) -> tuple[np.ndarray, float]:
    """Lower Cholesky factor of ``R + eta I`` with the smallest workable jitter.

    ``R`` itself is tried first; failing that, ``eta`` runs 1e-10, 1e-9, ...
    up to 1e-6.

    :raises SingularSystem: if even ``eta = 1e-6`` does not make ``R`` factorable.
    """
    for eta in (0.0, *JITTER_STEPS):
        A = R.copy()
        if eta:
            A[np.diag_indices_from(A)] += eta
        L, info = dpotrf(A, lower=1, clean=1, overwrite_a=1)
        if info == 0 and np.all(np.diag(L) > 0):
            return L, eta
    raise SingularSystem("correlation matrix not positive definite with maximal jitter")


@dataclass(frozen=True)
class _Profile:
    L: np.ndarray
    eta: float
    mu: float
    sigma2: float
    weights: np.ndarray
    rinv_one: np.ndarray
    one_rinv_one: float
    log_det: float

    def log_likelihood(self) -> float:
        return -0.5 * self.weights.size * math.log(self.sigma2) - 0.5 * self.log_det


def _profile_R(R: np.ndarray, f: np.ndarray) -> _Profile:
    n = f.size
    L, eta = factor_correlation(R)
    sol, _ = dpotrs(L, np.column_stack([np.ones(n), f]), lower=1)
    rinv_one, rinv_f = sol[:, 0], sol[:, 1]
    one_rinv_one = float(np.sum(rinv_one))
    mu = float(np.sum(rinv_f)) / one_rinv_one
    weights = rinv_f - mu * rinv_one
    sigma2 = float((f - mu) @ weights) / n
    if sigma2 < 1e-14 * (1.0 + float(f @ f)):
        raise DegenerateData(f"profiled variance {sigma2:.3g} vanishes; data are constant")
    log_det = 2.0 * float(np.sum(np.log(np.diag(L))))
    return _Profile(L, eta, mu, sigma2, weights, rinv_one, one_rinv_one, log_det)


def _profile(U: np.ndarray, f: np.ndarray, params: KrigingParams) -> _Profile:
    return _profile_R(correlation_matrix(params, U, U), f)


def concentrated_log_likelihood(samples: SampleSet, params: KrigingParams) -> float:
    """``-(n/2) ln sigma2_hat - (1/2) ln det R`` with mean and variance profiled out.

    :raises DegenerateData: for (numerically) constant values.
    """
    if len(samples) < 2:
        raise ValueError("the likelihood needs at least two samples")
    return _profile(samples.unit_points, samples.values, params).log_likelihood()


@dataclass(frozen=True, eq=False)
class KrigingModel:
    """Fitted Kriging predictor ``mu_hat + r(x)^T weights``.

    ``corr_factor`` is the lower Cholesky factor of ``R + jitter * I``.
    """

    params: KrigingParams
    domain: BoxDomain
    centers: np.ndarray
    values: np.ndarray
    mu_hat: float
    sigma2_hat: float
    corr_factor: np.ndarray = field(repr=False)
    jitter: float
    weights: np.ndarray = field(repr=False)
    log_likelihood: float
    unit_centers: np.ndarray = field(repr=False)
    _rinv_one: np.ndarray = field(repr=False)
    _one_rinv_one: float = field(repr=False)

    def predict_unit(self, u) -> tuple[np.ndarray, np.ndarray]:
        """Mean and variance at unit-cube rows ``u``."""
        r = correlation_matrix(self.params, np.atleast_2d(u), self.unit_centers)
        mean = self.mu_hat + r @ self.weights
        rinv_r, _ = dpotrs(self.corr_factor, r.T, lower=1)
        quad = np.einsum("ij,ji->i", r, rinv_r)
        gls = (1.0 - r @ self._rinv_one) ** 2 / self._one_rinv_one
        var = self.sigma2_hat * (1.0 - quad + gls)
        # residue of round-off and jitter at the nodes counts as zero
        floor = (1e-12 + 2.0 * self.jitter) * self.sigma2_hat
        return mean, np.where(var > floor, var, 0.0)


def kriging_model(samples: SampleSet, params: KrigingParams) -> KrigingModel:
    """Build the predictor for fixed correlation parameters."""
    if len(samples) < 2:
        raise ValueError("Kriging needs at least two samples")
    if params.dim != samples.dim:
        raise ValueError(f"params are {params.dim}-dimensional, samples {samples.dim}")
    U = samples.unit_points
    prof = _profile(U, samples.values, params)
    return KrigingModel(
        params=params,
        domain=samples.domain,
        centers=samples.points,
        values=samples.values,
        mu_hat=prof.mu,
        sigma2_hat=prof.sigma2,
        corr_factor=prof.L,
        jitter=prof.eta,
        weights=prof.weights,
        log_likelihood=prof.log_likelihood(),
        unit_centers=U,
        _rinv_one=prof.rinv_one,
        _one_rinv_one=prof.one_rinv_one,
    )


def default_bounds(dim: int) -> tuple[np.ndarray, np.ndarray]:
    """Search box over ``(log10 theta_1..d, p_1..d)``."""
    lo = np.r_[np.full(dim, LOG10_THETA_BOUNDS[0]), np.full(dim, POWER_BOUNDS[0])]
    hi = np.r_[np.full(dim, LOG10_THETA_BOUNDS[1]), np.full(dim, POWER_BOUNDS[1])]
    return lo, hi


def default_mle_solver(dim: int, seed: int = 0) -> AuxSolver:
    return AuxSolver(n_starts=10 * 2 * dim, max_local_iters=200, step_tolerance=1e-3, seed=seed)


def _unpack(z: np.ndarray, dim: int) -> KrigingParams:
    return KrigingParams(10.0 ** z[:dim], np.clip(z[dim:], 1.0, 2.0))


# returned by the likelihood search where R cannot be factored at all
_INFEASIBLE = 1e300


class _NegProfiledLikelihood:
    """``-concentrated_log_likelihood`` over the free search coordinates.

    Same arithmetic as :func:`_profile_R`, trimmed for the inner loop: pairwise
    coordinate gaps are cached and only the lower triangle of ``R`` is built.
    """

    def __init__(self, U: np.ndarray, f: np.ndarray, lo: np.ndarray, free: np.ndarray):
        n, self.d = U.shape
        self.rows, self.cols = np.tril_indices(n, -1)
        self.gaps = np.abs(U[self.rows] - U[self.cols])
        self.eye = np.eye(n)
        self.rhs = np.column_stack([np.ones(n), f])
        self.f = f
        self.tiny = 1e-14 * (1.0 + float(f @ f))
        self.lo = lo
        self.free = free

    def __call__(self, zfree) -> float:
        z = self.lo.copy()
        z[self.free] = zfree
        d = self.d
        R = self.eye.copy()
        R[self.rows, self.cols] = np.exp(-((self.gaps ** z[d:]) @ 10.0 ** z[:d]))
        for eta in (0.0, *JITTER_STEPS):
            L, info = dpotrf(R + eta * self.eye if eta else R, lower=1, clean=0)
            if info == 0:
                break
        else:
            return _INFEASIBLE
        sol, _ = dpotrs(L, self.rhs, lower=1)
        rinv_one, rinv_f = sol[:, 0], sol[:, 1]
        mu = rinv_f.sum() / rinv_one.sum()
        sigma2 = float((self.f - mu) @ (rinv_f - mu * rinv_one)) / self.f.size
        if sigma2 < self.tiny:
            return _INFEASIBLE
        return 0.5 * self.f.size * math.log(sigma2) + float(np.log(L.diagonal()).sum())


def fit_kriging(
    samples: SampleSet,
    bounds: Optional[tuple[Sequence[float], Sequence[float]]] = None,
    solver: Optional[AuxSolver] = None,
) -> KrigingModel:
    """Maximum-likelihood Kriging fit.

    :param bounds: ``(lower, upper)`` over ``(log10 theta_1..d, p_1..d)``.
        Coordinates with ``lower == upper`` are held fixed.
    :param solver: auxiliary solver for the likelihood search; defaults to
        ``10 * 2d`` starts.
    :raises DegenerateData: for constant data.
    """
    d = samples.dim
    if len(samples) < 2:
        raise ValueError("Kriging needs at least two samples")
    lo, hi = default_bounds(d) if bounds is None else (np.asarray(b, dtype=float) for b in bounds)
    lo, hi = np.asarray(lo, dtype=float), np.asarray(hi, dtype=float)
    if lo.shape != (2 * d,) or hi.shape != (2 * d,) or np.any(lo > hi):
        raise ValueError("bounds must be two 2d-vectors with lower <= upper")
    if np.any(lo[d:] < 1) or np.any(hi[d:] > 2):
        raise ValueError("power bounds must lie within [1, 2]")

    free = lo < hi
    if not np.any(free):
        return kriging_model(samples, _unpack(lo, d))

    U = samples.unit_points
    f = samples.values
    n = f.size
    # constant data is degenerate for every parameter value
    if np.ptp(f) <= 1e-7 * math.sqrt(1.0 + float(f @ f) / n):
        raise DegenerateData("constant data")

    negll = _NegProfiledLikelihood(U, f, lo, free)

    solver = solver or default_mle_solver(d)
    zbest, val = minimize(negll, BoxDomain(lo[free], hi[free]), solver)
    z = lo.copy()
    z[free] = zbest
    params = _unpack(z, d)
    log.debug("MLE theta=%s p=%s loglik=%.6g", params.theta, params.power, -val)
    return kriging_model(samples, params)


def predict_mean(model: KrigingModel, x):
    x = np.asarray(x, dtype=float)
    mean, _ = model.predict_unit(model.domain.to_unit(np.atleast_2d(x)))
    return float(mean[0]) if x.ndim == 1 else mean


def predict_variance(model: KrigingModel, x):
    """Predictive variance including the mean-estimation correction."""
    x = np.asarray(x, dtype=float)
    _, var = model.predict_unit(model.domain.to_unit(np.atleast_2d(x)))
    return float(var[0]) if x.ndim == 1 else var


def pi_from_moments(mean, sd, target):
    """``P[Y <= target]`` for ``Y ~ N(mean, sd^2)``; a step function when ``sd == 0``."""
    mean, sd = np.asarray(mean, dtype=float), np.asarray(sd, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        z = (target - mean) / sd
    out = np.where(sd > 0, normal_cdf(np.where(sd > 0, z, 0.0)), (mean <= target).astype(float))
    return float(out) if out.ndim == 0 else out


def ei_from_moments(mean, sd, f_min):
    """``E[max(f_min - Y, 0)]`` for ``Y ~ N(mean, sd^2)``."""
    mean, sd = np.asarray(mean, dtype=float), np.asarray(sd, dtype=float)
    gain = f_min - mean
    safe = np.where(sd > 0, sd, 1.0)
    with np.errstate(over="ignore", invalid="ignore"):
        z = gain / safe
        ei = gain * normal_cdf(z) + safe * normal_pdf(z)
    out = np.where(sd > 0, np.maximum(ei, 0.0), np.maximum(gain, 0.0))
    return float(out) if out.ndim == 0 else out


def probability_of_improvement(model: KrigingModel, x, target: float):
    x = np.asarray(x, dtype=float)
    mean, var = model.predict_unit(model.domain.to_unit(np.atleast_2d(x)))
    out = pi_from_moments(mean, np.sqrt(var), target)
    return float(out[0]) if x.ndim == 1 else out


def expected_improvement(model: KrigingModel, x, f_min: float):
    x = np.asarray(x, dtype=float)
    mean, var = model.predict_unit(model.domain.to_unit(np.atleast_2d(x)))
    out = ei_from_moments(mean, np.sqrt(var), f_min)
    return float(out[0]) if x.ndim == 1 else out
