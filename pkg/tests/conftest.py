import numpy as np
import pytest

from hybrid_zo.manifolds import CIRCLE, SPHERE
from hybrid_zo.warp import cost_from_config, rotation_family

Y_AXES = [[0.0, 1.0, 0.0], [0.0, 1.0, 0.0]]


def circle_family(delta=0.2, gains=(0.5, -0.5)):
    return rotation_family(cost_from_config("circle_1_minus_z1", CIRCLE), list(gains), 1.0, delta)


def sphere_family(delta=0.2, gains=(0.5, -0.5)):
    return rotation_family(cost_from_config("sphere_1_minus_z3", SPHERE), list(gains), 1.0, delta, axes=Y_AXES)


@pytest.fixture(scope="session")
def circle_fam():
    return circle_family()


@pytest.fixture(scope="session")
def sphere_fam():
    return sphere_family()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# One line per acceptance criterion, printed after the run.
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
