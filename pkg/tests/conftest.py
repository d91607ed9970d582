import os

import pytest

from lindstedt import load_model, make_rotation, quadratic_twist, standard_map_model

DATA = os.path.join(os.path.dirname(__file__), "data")


def data_path(name):
    return os.path.join(DATA, name)


@pytest.fixture(scope="session")
def golden():
    return make_rotation(periodic_tail=[1], label="golden")


@pytest.fixture(scope="session")
def silver():
    return make_rotation(periodic_tail=[2], label="silver")


@pytest.fixture(scope="session")
def std_map():
    return standard_map_model()


@pytest.fixture(scope="session")
def zdep_model():
    """z- and eps-dependent table with decay metadata."""
    sigma, _ = load_model(data_path("zdep_model.json"))
    return sigma


@pytest.fixture(scope="session")
def quad_twist(golden):
    # a(y) = y + y^2 / 2
    return quadratic_twist(golden.value, 0.5)


# acceptance lines are collected by tests/test_acceptance.py and echoed here
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
