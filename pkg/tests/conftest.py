import numpy as np
import pytest

from tailgame.specfile import bundled_spec


@pytest.fixture(scope="session")
def pennies():
    return bundled_spec("matching_pennies.json")


@pytest.fixture(scope="session")
def voorneveld():
    return bundled_spec("voorneveld.json")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
