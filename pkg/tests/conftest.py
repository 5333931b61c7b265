import numpy as np
import pytest

from plunge.frames import Window
from plunge.spectrum import theorem_checks

VERDICTS = {}


def record(criterion, ok, detail=""):
    """Store an acceptance verdict; printed in the terminal summary."""
    VERDICTS[criterion] = (bool(ok), detail)
    line = f"criterion {criterion}: {'PASS' if ok else 'FAIL'} {detail}"
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if not VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(VERDICTS):
        ok, detail = VERDICTS[k]
        terminalreporter.write_line(f"criterion {k:>2}: {'PASS' if ok else 'FAIL'}  {detail}")


def assert_exact(spec):
    """The exact inequalities every computed spectrum must satisfy."""
    ok, details = theorem_checks(spec)
    assert ok, details


@pytest.fixture(scope="session")
def window():
    return Window(0.3)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
