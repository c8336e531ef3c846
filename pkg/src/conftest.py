import pytest

from src.spmet.grid import build_grid
from src.spmet.parameters import Discretization, load_parameters


@pytest.fixture(scope="session")
def cell_params():
    return load_parameters()


@pytest.fixture(scope="session")
def disc():
    return Discretization()


@pytest.fixture(scope="session")
def ctx(cell_params, disc):
    return build_grid(cell_params, disc)
