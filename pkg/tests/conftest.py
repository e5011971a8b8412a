import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from tapersum.rng import stream

settings.register_profile(
    "default", max_examples=60, deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.register_profile("ci", max_examples=200, deadline=None)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

ACCEPTANCE_SEED = 12345


@pytest.fixture
def seed():
    return ACCEPTANCE_SEED


@pytest.fixture
def rng(seed):
    return stream(seed, 0)


@pytest.fixture
def identity_filter():
    from tapersum.filters import FilterSpec

    return FilterSpec.explicit([1.0])


def assert_close(a, b, rel=1e-12, abs_=0.0):
    np.testing.assert_allclose(a, b, rtol=rel, atol=abs_)


ACCEPTANCE_LINES = []


@pytest.fixture
def acceptance_log():
    return ACCEPTANCE_LINES.append


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2])):
            terminalreporter.write_line(line)
