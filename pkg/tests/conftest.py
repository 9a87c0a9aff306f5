import re

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from latentseq import SETTINGS, simulate_cohort

settings.register_profile(
    "default", deadline=None, suppress_health_check=[HealthCheck.too_slow, HealthCheck.data_too_large]
)
settings.load_profile("default")

# one line per acceptance criterion, filled by tests/test_acceptance.py
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(re.match(r"criterion (\d+)", s).group(1))):
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def setting1_cohort():
    return simulate_cohort(SETTINGS[1], [200, 200, 200], 44, seed=11)


@pytest.fixture(scope="session")
def small_cohort():
    return simulate_cohort(SETTINGS[3], [30, 30, 30], 20, seed=5)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
