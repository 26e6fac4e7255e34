import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

ACCEPTANCE = []


def record(criterion, passed, detail=""):
    """Log one acceptance line; printed again in the terminal summary."""
    line = f"[criterion {criterion}] {'PASS' if passed else 'FAIL'} {detail}".rstrip()
    print(line)
    ACCEPTANCE.append(line)
    return passed


@pytest.fixture
def accept():
    return record


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE:
            terminalreporter.write_line(line)
