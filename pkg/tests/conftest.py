import pytest

from xvpa.datatypes import default_system

MASTER_SEED = 20240817


@pytest.fixture(scope="session")
def dts():
    return default_system()


@pytest.fixture(scope="session")
def master_seed():
    return MASTER_SEED
