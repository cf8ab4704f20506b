import pytest
from hypothesis import settings

from helpers import ACCEPTANCE_LINES
from regge.generators import barycentric_subdivision, boundary_simplex, flat_torus

settings.register_profile("default", deadline=None, max_examples=30)
settings.load_profile("default")


@pytest.fixture(scope="session")
def s4():
    return boundary_simplex(3, 1.0)


@pytest.fixture(scope="session")
def t3():
    return flat_torus(3, 3)


@pytest.fixture(scope="session")
def t2():
    return flat_torus(2, 3)


@pytest.fixture(scope="session")
def s4_sub(s4):
    return barycentric_subdivision(s4)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
