import numpy as np
import pytest

from prt.core import ParameterSpace
from prt.models import (
    SIWR_DEFAULT_THETA,
    SIWR_SYSTEM,
    _siwr_packed,
    example1,
    example2,
    example3,
)
from prt.ode import integrate
from prt.sensitivity import eigendecompose


@pytest.fixture(scope="session", autouse=True)
def warm_kernels():
    """Compile the numba kernels once so timed tests measure algorithms, not JIT."""
    eigendecompose(np.eye(3))
    packed = _siwr_packed(SIWR_DEFAULT_THETA, 0.25, 25.0, 0.0)
    integrate(SIWR_SYSTEM, packed, (0.0, 1.0), np.array([0.5, 1.0]))
    from prt.models import CELLCYCLE_SYSTEM, load_cellcycle_defaults
    integrate(CELLCYCLE_SYSTEM, load_cellcycle_defaults(), (0.0, 1.0), np.array([0.5, 1.0]))


@pytest.fixture(scope="session")
def box12():
    return ParameterSpace(("theta1", "theta2"), [0.0, 0.0], [1.0, 2.0])


@pytest.fixture(scope="session")
def model1():
    return example1()


@pytest.fixture(scope="session")
def model2():
    return example2()


@pytest.fixture(scope="session")
def model3():
    return example3()
