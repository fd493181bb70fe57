import numpy as np
import pytest

from radialgreen import _backend
from radialgreen.core import BumpPotential, ConstantPotential, make_grid
from radialgreen.green import build_pair
from radialgreen.landscape import build_constraint_box, find_local_minima

# recorded fixture: F has an interior minimum near r = 0.536 (Neumann)
BUMP = BumpPotential(20.0, 400.0, 0.35, 0.08)


@pytest.fixture(scope="session")
def grid3():
    return make_grid(3, 2001, 1e-6)


@pytest.fixture(scope="session")
def pair_n(grid3):
    return build_pair(grid3, ConstantPotential(1.0), "neumann")


@pytest.fixture(scope="session")
def pair_d(grid3):
    return build_pair(grid3, ConstantPotential(1.0), "dirichlet")


@pytest.fixture(scope="session")
def bump_pair(grid3):
    return build_pair(grid3, BUMP, "neumann")


@pytest.fixture(scope="session")
def bump_box(bump_pair):
    rec = find_local_minima(bump_pair).interior_minima()[0]
    return build_constraint_box(bump_pair, rec)


@pytest.fixture(scope="session")
def const_box(pair_n):
    return build_constraint_box(pair_n, 1.0, R1=0.5)


@pytest.fixture(params=_backend.available())
def kernels(request):
    return _backend.load(request.param)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    import test_acceptance
    if not test_acceptance.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for res in test_acceptance.RESULTS.values():
        terminalreporter.write_line(res.line())
