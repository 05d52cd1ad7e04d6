import numpy as np
import pytest

from gridmotion.grid import CellDecision, Verdict

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def dyn(cell, b, support, members=None, pass_id=0, n=None):
    """Dynamic leaf decision for clustering tests; members default to fresh ids."""
    members = np.asarray(members if members is not None else [], dtype=np.int64)
    return CellDecision(cell, Verdict.DYNAMIC, b, support, n or support, 0, pass_id, "", None,
                        members, members)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
