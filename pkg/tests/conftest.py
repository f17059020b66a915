import numpy as np
import pytest

from crossdet.bc import ChannelSpec, identity_plan

PINNED_H = [[1, 0.5], [0.5, 1]]
PINNED_G = [[1, 0.3], [0.3, 1]]

# filled by tests/test_acceptance.py, printed once at the end of the run
ACCEPTANCE_LINES: list[str] = []


def pinned_spec(N=1.0, R0=1.0, G=PINNED_G):
    return ChannelSpec(PINNED_H, G, N, 10.0, R0)


@pytest.fixture
def spec():
    return pinned_spec()


@pytest.fixture
def plan():
    return identity_plan(5, 5)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda line: int(line.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
