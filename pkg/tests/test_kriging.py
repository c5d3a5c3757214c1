import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad
from scipy.stats import multivariate_normal

from conftest import quasi_uniform, unit_samples
from rsgop.core import BoxDomain, DegenerateData, latin_hypercube
from rsgop.kriging import (
    KrigingParams,
    concentrated_log_likelihood,
    correlation,
    correlation_matrix,
    ei_from_moments,
    expected_improvement,
    factor_correlation,
    fit_kriging,
    kriging_model,
    normal_cdf,
    pi_from_moments,
    predict_mean,
    predict_variance,
    probability_of_improvement,
)
from rsgop.solver import AuxSolver

RHO = math.exp(-1.0)
# closed form of the two-point example: v^T R^-1 v / n with v = (-0.5, 0.5)
SIGMA2_TWO_POINT = 0.5 * (1 + RHO) / (1 - RHO**2) / 2


def two_point():
    return unit_samples([0.0, 1.0], [0.0, 1.0]), KrigingParams([1.0], [1.0])


def synthetic_field(seed, n=40, theta=2.0, power=2.0):
    X = latin_hypercube(n, BoxDomain.unit(1), seed)
    R = correlation_matrix(KrigingParams([theta], [power]), X, X)
    L = np.linalg.cholesky(R + 1e-10 * np.eye(n))
    f = L @ np.random.default_rng(seed).standard_normal(n)
    return unit_samples(X, f)


class TestParams:
    def test_validation(self):
        with pytest.raises(ValueError):
            KrigingParams([-1.0], [2.0])
        with pytest.raises(ValueError):
            KrigingParams([1.0], [2.5])
        with pytest.raises(ValueError):
            KrigingParams([1.0, 1.0], [2.0, 1.0, 1.0])

    def test_scalar_power_broadcasts(self):
        np.testing.assert_array_equal(KrigingParams([1.0, 3.0], [2.0]).power, [2.0, 2.0])

    def test_isotropic(self):
        p = KrigingParams.isotropic(4.0, 2.0, 3)
        np.testing.assert_array_equal(p.theta, [4.0] * 3)
        assert p.dim == 3


class TestCorrelation:
    def test_examples(self):
        p = KrigingParams([1.0], [1.0])
        assert correlation(p, [0.3], [0.3]) == 1.0
        assert correlation(p, [0.0], [1.0]) == pytest.approx(0.3678794, abs=1e-7)
        assert correlation(KrigingParams([0.0, 0.0], [2.0, 1.0]), [0.0, 0.1], [0.9, 0.7]) == 1.0

    def test_anisotropic(self):
        p = KrigingParams([2.0, 0.5], [2.0, 1.0])
        assert correlation(p, [0.1, 0.2], [0.4, 0.9]) == pytest.approx(math.exp(-(2 * 0.09 + 0.5 * 0.7)))


class TestNormalCdf:
    def test_values(self):
        assert normal_cdf(0.0) == 0.5
        oracle = 0.5 + quad(lambda t: math.exp(-t * t / 2) / math.sqrt(2 * math.pi), 0, 1.959964)[0]
        assert abs(oracle - 0.975) < 1e-6
        assert normal_cdf(1.959964) == pytest.approx(oracle, abs=1e-10)

    @given(st.floats(-30, 30))
    def test_symmetry(self, z):
        assert normal_cdf(z) == pytest.approx(1 - normal_cdf(-z), abs=1e-12)


class TestLikelihood:
    def test_two_point_closed_form(self):
        s, p = two_point()
        m = kriging_model(s, p)
        assert m.mu_hat == pytest.approx(0.5, abs=1e-12)
        assert SIGMA2_TWO_POINT == pytest.approx(0.3954944, abs=1e-6)
        assert m.sigma2_hat == pytest.approx(SIGMA2_TWO_POINT, abs=1e-12)
        expected = -math.log(SIGMA2_TWO_POINT) - 0.5 * math.log(1 - RHO**2)
        assert concentrated_log_likelihood(s, p) == pytest.approx(expected, rel=1e-12)

    def test_constant_data(self):
        s = unit_samples([0.0, 0.5, 1.0], [2.0, 2.0, 2.0])
        with pytest.raises(DegenerateData):
            concentrated_log_likelihood(s, KrigingParams([1.0], [2.0]))
        with pytest.raises(DegenerateData):
            fit_kriging(s)

    def test_identity_limit(self, rng):
        X, _ = quasi_uniform(rng, 9, 2)
        f = rng.normal(size=9)
        m = kriging_model(unit_samples(X, f), KrigingParams.isotropic(1e5, 2.0, 2))
        assert m.mu_hat == pytest.approx(f.mean(), abs=1e-12)
        assert m.sigma2_hat == pytest.approx(f.var(), rel=1e-12)

    def test_matches_gaussian_density(self, rng):
        for _ in range(20):
            n = int(rng.integers(3, 15))
            X, _ = quasi_uniform(rng, n, 2)
            f = rng.normal(size=n)
            p = KrigingParams(10 ** rng.uniform(0.5, 2, 2), rng.uniform(1, 2, 2))
            m = kriging_model(unit_samples(X, f), p)
            assert m.jitter == 0.0
            R = correlation_matrix(p, X, X)
            full = multivariate_normal(np.full(n, m.mu_hat), m.sigma2_hat * R).logpdf(f)
            conc = concentrated_log_likelihood(unit_samples(X, f), p)
            assert conc - n / 2 * (math.log(2 * math.pi) + 1) == pytest.approx(full, abs=1e-8)

    def test_jitter_escalates(self):
        R = np.ones((3, 3))
        L, eta = factor_correlation(R)
        assert eta > 0
        np.testing.assert_allclose(L @ L.T, R + eta * np.eye(3), atol=1e-12)


class TestPredictor:
    @pytest.mark.parametrize("theta", [0.5, 2.0, 8.0])
    @pytest.mark.parametrize("power", [1.0, 1.5, 2.0])
    def test_interpolates_and_variance_vanishes(self, theta, power, rng):
        for _ in range(50):
            n = int(rng.integers(3, 13))
            X = rng.random((n, 2))
            f = rng.normal(size=n) * rng.choice([1.0, 100.0])
            m = kriging_model(unit_samples(X, f), KrigingParams.isotropic(theta, power, 2))
            assert np.max(np.abs(predict_mean(m, X) - f) / (1 + np.abs(f))) <= 1e-6
            assert np.all(predict_variance(m, X) <= 1e-6 * m.sigma2_hat)

    def test_two_point_midpoint(self):
        m = kriging_model(*two_point())
        assert predict_mean(m, [0.5]) == pytest.approx(0.5, abs=1e-12)
        # weights are antisymmetric, so the correlation at the midpoint cancels
        assert m.weights.sum() == pytest.approx(0.0, abs=1e-12)

    def test_far_from_data(self, rng):
        X, _ = quasi_uniform(rng, 6, 2)
        f = rng.normal(size=6)
        m = kriging_model(unit_samples(X, f), KrigingParams.isotropic(1e6, 2.0, 2))
        probe = np.array([[0.0, 0.0], [1.0, 1.0]])
        np.testing.assert_allclose(predict_mean(m, probe), m.mu_hat)
        one_rinv_one = 6.0  # R is the identity
        np.testing.assert_allclose(predict_variance(m, probe), m.sigma2_hat * (1 + 1 / one_rinv_one))

    def test_variance_nonnegative(self, rng):
        X = rng.random((15, 2))
        m = kriging_model(unit_samples(X, rng.normal(size=15)), KrigingParams([3.0, 20.0], [1.7, 2.0]))
        assert np.all(predict_variance(m, rng.random((1000, 2))) >= 0)

    def test_original_units(self):
        dom = BoxDomain([-5.0], [5.0])
        from rsgop.core import SampleSet

        s = SampleSet(dom, [[-5.0], [5.0]], [0.0, 1.0])
        m = kriging_model(s, KrigingParams([1.0], [1.0]))
        assert m.sigma2_hat == pytest.approx(SIGMA2_TWO_POINT)
        assert predict_mean(m, [0.0]) == pytest.approx(0.5)


class TestAcquisitionValues:
    def test_pi_examples(self):
        assert pi_from_moments(2.0, 0.3, 2.0) == 0.5
        assert pi_from_moments(1.0, 1.0, 0.0) == pytest.approx(0.158655, abs=1e-6)
        assert pi_from_moments(1.0, 0.0, 0.5) == 0.0
        assert pi_from_moments(1.0, 0.0, 1.0) == 1.0

    def test_ei_examples(self):
        assert ei_from_moments(3.0, 1.0, 3.0) == pytest.approx(1 / math.sqrt(2 * math.pi))
        assert ei_from_moments(2.0, 0.0, 1.0) == 0.0
        assert ei_from_moments(0.5, 0.0, 1.0) == 0.5

    def test_ei_monte_carlo(self):
        y = np.random.default_rng(1).normal(0.5, 0.25, 1_000_000)
        assert ei_from_moments(0.5, 0.25, 0.0) == pytest.approx(np.maximum(-y, 0).mean(), abs=1e-3)

    @given(st.floats(-5, 5), st.floats(0, 3), st.floats(-5, 5), st.floats(0, 5))
    def test_pi_monotone_in_target(self, mean, sd, t, dt):
        assert pi_from_moments(mean, sd, t) <= pi_from_moments(mean, sd, t + dt)

    @given(st.floats(-1e3, 1e3), st.floats(0, 1e3), st.floats(-1e3, 1e3))
    def test_ei_nonnegative_and_bounded_below_by_gain(self, mean, sd, f_min):
        ei = ei_from_moments(mean, sd, f_min)
        assert ei >= 0
        assert ei >= max(f_min - mean, 0) - 1e-9 * (1 + abs(f_min) + abs(mean))

    def test_zero_at_samples(self, rng):
        X = rng.random((8, 2))
        f = rng.normal(size=8)
        m = kriging_model(unit_samples(X, f), KrigingParams.isotropic(5.0, 2.0, 2))
        np.testing.assert_array_equal(expected_improvement(m, X, f.min()), 0.0)
        worse = f > f.min()
        np.testing.assert_array_equal(probability_of_improvement(m, X[worse], f.min() - 1.0), 0.0)
        # the best node reproduces f_min to round-off, so any target above it is certain
        assert probability_of_improvement(m, X[np.argmin(f)], f.min() + 1e-9) == 1.0


class TestFit:
    def test_collapsed_bounds_reproduce_closed_form(self):
        s, _ = two_point()
        m = fit_kriging(s, bounds=([0.0, 1.0], [0.0, 1.0]))
        assert m.params.theta[0] == 1.0 and m.params.power[0] == 1.0
        assert m.mu_hat == pytest.approx(0.5)
        assert m.sigma2_hat == pytest.approx(0.3954944, abs=1e-6)

    def test_mle_recovery(self):
        m = fit_kriging(synthetic_field(1), solver=AuxSolver(n_starts=20, step_tolerance=1e-3, seed=1))
        assert 1.0 <= m.params.theta[0] <= 4.0

    def test_maximizes_over_grid(self):
        s = synthetic_field(2, n=20)
        m = fit_kriging(s, solver=AuxSolver(n_starts=20, step_tolerance=1e-4, seed=0))
        best_grid = max(
            concentrated_log_likelihood(s, KrigingParams([10**lt], [p]))
            for lt in np.linspace(-2, 3, 41)
            for p in np.linspace(1, 2, 11)
        )
        assert m.log_likelihood >= best_grid - 1e-6

    def test_deterministic(self):
        s = synthetic_field(3, n=15)
        solver = AuxSolver(n_starts=6, step_tolerance=1e-3, seed=9)
        a, b = fit_kriging(s, solver=solver), fit_kriging(s, solver=solver)
        np.testing.assert_array_equal(a.params.theta, b.params.theta)
        np.testing.assert_array_equal(a.params.power, b.params.power)

    def test_bad_bounds(self):
        s, _ = two_point()
        with pytest.raises(ValueError):
            fit_kriging(s, bounds=([0.0, 0.5], [1.0, 2.0]))
