import numpy as np
import pytest

from nomaisac.scenario import SystemConfig, sample_channels
from nomaisac.sensing import spec_from_config


@pytest.fixture(scope="session")
def cfg4():
    return SystemConfig(n_antennas=4, n_users=2, q_streams=1)


@pytest.fixture(scope="session")
def spec4(cfg4):
    return spec_from_config(cfg4)


@pytest.fixture(scope="session")
def ch4(cfg4):
    return sample_channels(cfg4)


@pytest.fixture(scope="session")
def cfg_su():
    return SystemConfig(n_antennas=4, n_users=1)


@pytest.fixture(scope="session")
def spec_su(cfg_su):
    return spec_from_config(cfg_su)


@pytest.fixture(scope="session")
def ch_su(cfg_su):
    return sample_channels(cfg_su)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    import sys
    lines = []
    for name, mod in list(sys.modules.items()):
        if name.rsplit(".", 1)[-1] == "test_acceptance":
            lines += getattr(mod, "RESULTS", [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(set(lines)):
            terminalreporter.write_line(line)
