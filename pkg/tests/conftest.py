import numpy as np
import pytest

from stepstones.core import make_individual


def ind(b, f, id, genome=None):
    """Individual with a 1-D (or given) behavior; genome defaults to the behavior."""
    b = np.atleast_1d(np.asarray(b, dtype=float))
    return make_individual(b if genome is None else genome, f, b, id)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# one line per acceptance criterion, printed at the end of the session
ACCEPTANCE_LINES: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[n])
