import numpy as np
import pytest

from dragtrack.config import ScenarioConfig
from dragtrack.engine import run_trajectory


@pytest.fixture(scope="session")
def scenario():
    return ScenarioConfig.load().validate()


@pytest.fixture(scope="session")
def reference(scenario):
    return scenario.build_reference()


@pytest.fixture(scope="session")
def nominal_log(scenario, reference):
    """Zero-dispersion closed-loop run with the nominal gain set."""
    return run_trajectory(scenario.sim_config(reference))


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(1234)
