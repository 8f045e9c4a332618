import numpy as np
import pytest

from diffuse import kernels
from diffuse.core import SparseMatrix


def random_substochastic(rng, n, density=0.3, max_sum=0.95):
    """Random nonnegative matrix with every column sum <= max_sum (some columns empty)."""
    a = rng.uniform(0.0, 1.0, size=(n, n)) * (rng.uniform(size=(n, n)) < density)
    sums = a.sum(axis=0)
    target = rng.uniform(0.2, max_sum, size=n)
    a = a * np.where(sums > 0, target / np.where(sums > 0, sums, 1.0), 0.0)
    return SparseMatrix.from_dense(a)


def random_stochastic(rng, n):
    a = rng.uniform(0.05, 1.0, size=(n, n))
    return SparseMatrix.from_dense(a / a.sum(axis=0))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(params=kernels.available())
def backend(request):
    return request.param
