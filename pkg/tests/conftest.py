import numpy as np
import pytest
from hypothesis import settings

from csgld.oracle import QuadratureGrid, theta_star
from csgld.partition import EnergyPartition
from csgld.target import benchmark_mixture

settings.register_profile("csgld", deadline=None, max_examples=100)
settings.load_profile("csgld")

# Values of U for the benchmark mixture computed with mpmath at 50 digits.
U_AT_4 = 1.429764156970663
U_AT_MINUS_6 = 1.835229265078828


@pytest.fixture(scope="session")
def mixture():
    return benchmark_mixture()


@pytest.fixture(scope="session")
def quiet_mixture():
    return benchmark_mixture(gradient_noise_sigma=0.0)


@pytest.fixture(scope="session")
def p50():
    return EnergyPartition(50, 2.0, 1.0)


@pytest.fixture(scope="session")
def p10():
    return EnergyPartition(10, 2.0, 1.0)


@pytest.fixture(scope="session")
def grid():
    return QuadratureGrid()


@pytest.fixture(scope="session")
def star50(mixture, p50, grid):
    return theta_star(mixture, p50, grid)


@pytest.fixture(scope="session")
def star10(mixture, p10, grid):
    return theta_star(mixture, p10, grid)


def random_simplex(rng, m):
    t = rng.dirichlet(np.ones(m))
    t = np.maximum(t, 1e-6)
    return t / t.sum()
