"""Shared fixtures and the slow-test switch."""
import numpy as np
import pytest

from d2dsim.models.schemas import ExperimentConfig, RadioParams
from d2dsim.services.topology_service import topology_service


def pytest_addoption(parser):
    parser.addoption(
        "--runslow", action="store_true", default=False, help="run statistical trend tests"
    )


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture
def params() -> RadioParams:
    return RadioParams()


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)


@pytest.fixture
def single_cell():
    return topology_service.build_layout(1)


@pytest.fixture
def small_config() -> ExperimentConfig:
    """A few UEs over four cells, short enough for unit tests."""
    return ExperimentConfig(cell_type=3, n_cues=6, n_pairs=4, snapshots=12, seed=7)
