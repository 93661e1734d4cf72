import numpy as np
import pytest

from transition_response.response import alpha_point, builtin_potential


@pytest.fixture(scope="session")
def point08():
    return alpha_point(0.8)


@pytest.fixture(scope="session")
def point1():
    return alpha_point(1.0)


@pytest.fixture(scope="session")
def point125():
    return alpha_point(1.25)


@pytest.fixture(scope="session")
def phi_x():
    return builtin_potential("x")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import LINES

    if LINES:
        terminalreporter.section("acceptance")
        for line in LINES:
            terminalreporter.write_line(line)
