import numpy as np
import pytest

from mcbnav.world import ScenarioConfig, SimParams, resolve_map


@pytest.fixture(scope="session")
def clutter_map():
    return resolve_map("desk_clutter")


@pytest.fixture(scope="session")
def open_map():
    return resolve_map("desk_open")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def sim_params():
    return SimParams()


@pytest.fixture(scope="session")
def scen_cfg():
    return ScenarioConfig()
