import numpy as np
import pytest

from fbnrcs.model import LassoInstance, SensingMatrix, generate_sensing_matrix, generate_stream, window_params


def random_instance(seed, n=500, S=0.05, sigma=0.1):
    """Seeded window problem built the same way as a stream window."""
    s, m, lam = window_params(n, S, sigma)
    A = generate_sensing_matrix(m, n, seed)
    x = generate_stream(n, S, sigma, seed, amplitude=8 * sigma * np.sqrt(2 * np.log(n))).values
    y = A.matvec(x) + sigma * np.random.default_rng([seed, 99]).standard_normal(m)
    return LassoInstance.create(A, y, lam), np.array(x)


def small_instance(seed, m=6, n=10, lam=0.3):
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((m, n)) / np.sqrt(m)
    y = rng.standard_normal(m)
    return LassoInstance.create(SensingMatrix.from_array(A), y, lam)


def one_dim(lam=0.5, gamma=0.5):
    return LassoInstance.create(np.array([[1.0]]), np.array([1.0]), lam, gamma)


@pytest.fixture
def scalar_instance():
    return one_dim()
