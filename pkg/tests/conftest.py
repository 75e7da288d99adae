import numpy as np
import pytest

from lpvsdr.manipulator import ManipulatorParams, build_lpv_model
from lpvsdr.simulation import default_dataset


@pytest.fixture(scope="session")
def params():
    return ManipulatorParams()


@pytest.fixture(scope="session")
def model(params):
    return build_lpv_model(params)


@pytest.fixture(scope="session")
def dataset(params):
    return default_dataset(params)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
