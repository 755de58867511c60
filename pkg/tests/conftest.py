import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from motionfit import skeleton

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def tree():
    return skeleton.canonical_tree()


@pytest.fixture
def walk():
    return skeleton.synthesize_test_motion("walk", 60, seed=42)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


ACCEPTANCE_KEY = "_acceptance_lines"


@pytest.fixture
def report(request):
    """Record one PASS/FAIL line for an acceptance criterion."""
    lines = getattr(request.config, ACCEPTANCE_KEY, None)
    if lines is None:
        lines = []
        setattr(request.config, ACCEPTANCE_KEY, lines)

    def _report(name, ok, detail):
        line = f"{'PASS' if ok else 'FAIL'}  {name}: {detail}"
        lines.append(line)
        print(line)
        return ok

    return _report


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = getattr(config, ACCEPTANCE_KEY, None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
