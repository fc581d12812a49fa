import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "default", deadline=None, max_examples=40,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


_ACCEPTANCE_LINES = {}


@pytest.fixture
def record():
    """Record one acceptance line: record(number, name, passed, detail, seconds)."""
    def _record(number, name, passed, detail, seconds):
        line = f"[{number:2d}] {'PASS' if passed else 'FAIL'}  {name}: {detail} ({seconds:.1f} s)"
        _ACCEPTANCE_LINES[number] = line
        print(line)
    return _record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.write_sep("=", "acceptance criteria")
        for number in sorted(_ACCEPTANCE_LINES):
            terminalreporter.write_line(_ACCEPTANCE_LINES[number])
