import numpy as np
import pytest

from goalspace.env import sample_dataset


@pytest.fixture(scope="session")
def armball_small():
    """500 passive ArmBall observations: ``(states, images, positions)``."""
    states, images = sample_dataset("ArmBall", 500, np.random.default_rng(1234))
    return states, images, np.array([s.object_pos for s in states])


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for n in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[n])
