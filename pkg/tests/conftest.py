import numpy as np
import pytest

from pnetsim import BehavioralParams
from pnetsim.fixtures import (
    be64_economy,
    d2_economy,
    d3_economy,
    reference_scenario,
    scenario_for,
)


@pytest.fixture(scope="session")
def d2():
    return d2_economy()


@pytest.fixture(scope="session")
def d3():
    return d3_economy()


@pytest.fixture(scope="session")
def be64():
    return be64_economy()


@pytest.fixture(scope="session")
def ref_scenario():
    return reference_scenario()


@pytest.fixture()
def params():
    return BehavioralParams()


def zero_scenario(economy):
    """Scenario with the reference timeline but all shock magnitudes zero."""
    return scenario_for(economy)


@pytest.fixture()
def rng():
    return np.random.default_rng(987654321)
