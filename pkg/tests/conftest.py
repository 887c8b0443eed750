import numpy as np
import pytest

from fairir.data import load_german, make_synthetic, prepare_splits


@pytest.fixture(scope="session")
def german():
    return load_german("sex")


@pytest.fixture(scope="session")
def german_splits(german):
    return prepare_splits(german, 0)


@pytest.fixture(scope="session")
def synthetic_splits():
    return prepare_splits(make_synthetic(n=300, seed=0), 0)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split("criterion ")[1].split(":")[0])):
            terminalreporter.write_line(line)
