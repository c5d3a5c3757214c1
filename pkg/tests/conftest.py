import numpy as np
import pytest

from rsgop.core import BoxDomain, SampleSet


def quasi_uniform(rng, n, d):
    """``n`` points in distinct cells of an ``m^d`` grid, jittered within their cell.

    Returns the points and the cell width ``h``; pairwise separation is at
    least ``0.4 h``.
    """
    m = int(np.ceil(n ** (1.0 / d)))
    cells = rng.choice(m**d, size=n, replace=False)
    idx = np.stack(np.unravel_index(cells, (m,) * d), axis=1)
    return (idx + 0.5 + rng.uniform(-0.3, 0.3, (n, d))) / m, 1.0 / m


def unit_samples(points, values):
    points = np.asarray(points, dtype=float)
    if points.ndim == 1:
        points = points[:, None]
    return SampleSet(BoxDomain.unit(points.shape[1]), points, values)


@pytest.fixture
def rng():
    return np.random.default_rng(20240531)


# well-conditioned shape parameters for interpolation checks on ~20 points in the unit square
WELL_CONDITIONED_GAMMA = {"multiquadric": 0.1, "gaussian": 10.0}


def scaled_kernel(name, h):
    """Kernel whose shape parameter follows the point spacing ``h``."""
    from rsgop.rbf import KernelKind

    if name == "gaussian":
        return KernelKind(name, gamma=1.0 / h**2)
    if name == "multiquadric":
        return KernelKind(name, gamma=h)
    return KernelKind(name)


def utility_instance(rng, name, d, n):
    """Random (samples, kernel, y, f_star) with y well separated from the samples."""
    points, h = quasi_uniform(rng, n, d)
    samples = unit_samples(points, rng.normal(size=n))
    while True:
        y = rng.random(d)
        if samples.min_distance(y) > 0.1 * h:
            break
    f = samples.values
    f_star = f.min() - np.ptp(f) * (0.1 + rng.random())
    return samples, scaled_kernel(name, h), y, f_star


def grid_oracle(fn, domain, m):
    """Global minimum by an ``m^d`` grid scan polished with Nelder-Mead.

    Independent of the package's own solver; returns ``(point, value)``.
    """
    from scipy.optimize import minimize as nm

    axes = [np.linspace(lo, hi, m) for lo, hi in zip(domain.lower, domain.upper)]
    G = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, domain.dim)
    vals = np.array([fn(g) for g in G])
    x0 = G[np.argmin(vals)]
    clipped = lambda x: fn(np.clip(x, domain.lower, domain.upper))
    res = nm(clipped, x0, method="Nelder-Mead", options={"xatol": 1e-10, "fatol": 1e-14, "maxiter": 5000})
    x = np.clip(res.x, domain.lower, domain.upper)
    return x, fn(x)
