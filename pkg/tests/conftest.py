import math

import pytest

from exotension.transmission import BowdenModel


@pytest.fixture
def bench_model():
    """Transmission used throughout the identification examples."""
    return BowdenModel(mu=0.25, phi=math.pi / 2, pulley_radius=0.035)


def pytest_terminal_summary(terminalreporter):
    """Echo the acceptance verdicts, which are otherwise hidden by output capture."""
    import sys
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(lines):
        terminalreporter.write_line(lines[n])
