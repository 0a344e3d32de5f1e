import numpy as np
import pytest

from kinfrac import EquilibriumSpec, build_velocity_quadrature


@pytest.fixture(scope="session")
def spec1():
    return EquilibriumSpec(1, 1.5)


@pytest.fixture(scope="session")
def quad1(spec1):
    return build_velocity_quadrature(spec1)


@pytest.fixture(scope="session")
def spec2():
    return EquilibriumSpec(2, 1.5)


@pytest.fixture(scope="session")
def quad2(spec2):
    return build_velocity_quadrature(spec2)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
