import numpy as np
import pytest

from crossbar_quant.channel import ChannelParams

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def defaults():
    return ChannelParams()


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
