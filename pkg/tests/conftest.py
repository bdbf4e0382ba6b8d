import numpy as np
import pytest

from schemerisk.annuity import DiscountBasis
from schemerisk.lifetable import MortalityBasis, from_rates, pma92c10


@pytest.fixture(scope="session")
def pma():
    return pma92c10()


@pytest.fixture(scope="session")
def discount():
    return DiscountBasis(0.04)


@pytest.fixture(scope="session")
def deterministic():
    return MortalityBasis.deterministic()


@pytest.fixture(scope="session")
def two_point():
    return MortalityBasis.two_point(1.0)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_table(rng, n_ages=None, first_age=0):
    """Small closed table with q drawn uniformly on (0.05, 0.9)."""
    n = int(rng.integers(2, 11)) if n_ages is None else n_ages
    q = np.append(rng.uniform(0.05, 0.9, n - 1), 1.0)
    return from_rates(q, first_age, name="random")


_ACCEPTANCE_LINES = []


@pytest.fixture
def acceptance_record():
    def record(line):
        _ACCEPTANCE_LINES.append(line)
        print(line)

    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
