import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from chainbound.rng import Pcg32, RngSeed, substream

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

# filled by tests/test_acceptance.py, echoed at the end of the run
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)


@pytest.fixture
def gen():
    """Factory for independent test generators keyed by integer labels."""
    def make(*labels):
        return Pcg32(substream(RngSeed(0xC0FFEE), *labels))
    return make


def normal_matrix(g: Pcg32, rows: int, cols: int) -> np.ndarray:
    return g.normal(rows * cols).reshape(rows, cols)
