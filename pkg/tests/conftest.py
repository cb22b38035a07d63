import os

import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("default", deadline=None, max_examples=50)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def small_regression(rng):
    """200 x 5 matrix where y depends on the first two columns only."""
    X = rng.uniform(0, 1, (200, 5))
    y = 3 * X[:, 0] + np.sin(4 * X[:, 1])
    return X, y


_CRITERIA = []


@pytest.fixture
def criterion():
    """Record one acceptance line; ``criterion(n, ok, detail)`` also asserts ``ok``."""

    def record(n, ok, detail):
        _CRITERIA.append((n, bool(ok), detail))
        print(f"{'PASS' if ok else 'FAIL'} criterion {n}: {detail}")
        assert ok, detail

    return record


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n, ok, detail in sorted(_CRITERIA, key=lambda c: c[0]):
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'} criterion {n}: {detail}")
