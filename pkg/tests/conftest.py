import sys
from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, str(Path(__file__).parent))

settings.register_profile(
    "default", deadline=None, max_examples=40, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")

from frontlab.hypotheses import ReactionHypotheses  # noqa: E402


@pytest.fixture
def hyp1():
    """d=1 constants used across the solver and harness tests."""
    return ReactionHypotheses(M=10, theta1=0.25, m1=2, alpha1=1, ramp_width=0.3, d=1)


@pytest.fixture
def hyp2():
    return ReactionHypotheses(M=10, theta1=0.25, m1=2, alpha1=1, ramp_width=0.3, d=2)


_VERDICTS = []


@pytest.fixture
def verdict():
    """Print and collect one PASS/FAIL line; returns the flag for asserting."""

    def record(number, name, ok, detail=""):
        line = f"{'PASS' if ok else 'FAIL'} criterion {number}: {name}" + (f" | {detail}" if detail else "")
        print(line)
        _VERDICTS.append(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if _VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in _VERDICTS:
            terminalreporter.write_line(line)
