import pytest

from nhimpact import Tolerances, disk_scenario
from nhimpact.scenarios import bouncing_particle_scenario


@pytest.fixture
def disk():
    return disk_scenario().system


@pytest.fixture
def tol():
    return Tolerances()


@pytest.fixture
def particle1d():
    return bouncing_particle_scenario(1, wall=1.0).system
