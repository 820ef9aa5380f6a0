import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", max_examples=40, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

_CRITERIA = []


def _status(ok):
    return "SKIP" if ok is None else ("PASS" if ok else "FAIL")


@pytest.fixture
def criterion():
    """Record one acceptance line: ``criterion(number, ok, detail)``; ``ok=None`` means skipped."""
    def record(number, ok, detail):
        _CRITERIA.append((number, ok, detail))
        print(f"criterion {number:>2}: {_status(ok)}  {detail}")
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number, ok, detail in sorted(_CRITERIA, key=lambda r: r[0]):
        terminalreporter.write_line(f"criterion {number:>2}: {_status(ok)}  {detail}")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
