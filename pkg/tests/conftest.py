import numpy as np
import pytest

from nlch.grid import Field, GridSpec
from nlch.kernel import KernelSpec, build
from nlch.potential import logarithmic_potential, polynomial_potential


@pytest.fixture(scope="session")
def grid256():
    return GridSpec(1, (1.0,), (256,))


@pytest.fixture(scope="session")
def grid64():
    return GridSpec(1, (1.0,), (64,))


@pytest.fixture(scope="session")
def bundle_wide(grid256):
    """Wide smooth kernel with a_* ~ 2: admits eps up to ~0.13."""
    return build(KernelSpec("gaussian", width=3.0, normalization=2.05), grid256)


@pytest.fixture(scope="session")
def bundle64(grid64):
    return build(KernelSpec("gaussian", width=3.0, normalization=2.05), grid64)


@pytest.fixture(scope="session")
def poly():
    return polynomial_potential(0.5)


@pytest.fixture(scope="session")
def logpot():
    return logarithmic_potential(0.3, 0.6)


@pytest.fixture
def cosine_data(grid256):
    x = grid256.axis_coordinates(0)
    return (
        Field(grid256, 0.2 * np.cos(np.pi * x) + 0.1 * np.cos(2 * np.pi * x)),
        Field(grid256, 0.1 * np.cos(np.pi * x)),
        Field(grid256, 0.6 + 0.2 * np.cos(np.pi * x)),
    )
