import numpy as np
import pytest

from lorentzlab import HedlundParams, TrigPoly, make_boundary_2torus, make_conformally_flat, make_flat, make_hedlund

LAMBDAS = (0.5, 0.3, 0.2)
EPS = 0.01

# acceptance lines collected during the session, printed in the terminal summary
ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def flat2():
    return make_flat(2)


@pytest.fixture(scope="session")
def flat3():
    return make_flat(3)


@pytest.fixture(scope="session")
def conformal2():
    return make_conformally_flat(2, TrigPoly.sine(2, 1, 0.3))


@pytest.fixture(scope="session")
def boundary2():
    return make_boundary_2torus()


@pytest.fixture(scope="session")
def hedlund_params():
    return HedlundParams(LAMBDAS, EPS)


@pytest.fixture(scope="session")
def hedlund(hedlund_params):
    return make_hedlund(hedlund_params, verify=False)


@pytest.fixture
def rng():
    return np.random.default_rng(0)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
