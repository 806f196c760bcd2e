import time

import pytest

from mmwave_hetnet.model import table1_config

MC_SEED = 42
MC_TRIALS = 100_000

ACCEPTANCE_LINES = []
_TIMINGS = {}


@pytest.fixture(scope="session")
def cfg():
    return table1_config()


@pytest.fixture(scope="session")
def table1_sample(cfg):
    """Shared 10^5-realization simulation of the reference network."""
    from mmwave_hetnet.montecarlo import simulate

    start = time.perf_counter()
    sample = simulate(cfg, MC_TRIALS, MC_SEED)
    _TIMINGS["table1_sample"] = time.perf_counter() - start
    return sample


@pytest.fixture(scope="session")
def sample_seconds(table1_sample):
    return _TIMINGS["table1_sample"]


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
