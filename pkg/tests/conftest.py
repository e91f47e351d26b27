import pytest

from gridchat.acpf import SecurityLimits
from gridchat.fixtures import (
    GRID9G_CONTINGENCIES,
    duck_curve,
    feeder12,
    grid9g,
    grid9g_calendar,
)


@pytest.fixture(scope="session")
def feeder():
    return feeder12()


@pytest.fixture(scope="session")
def grid():
    return grid9g()


@pytest.fixture(scope="session")
def calendar():
    return grid9g_calendar()


@pytest.fixture(scope="session")
def contingencies():
    return GRID9G_CONTINGENCIES


@pytest.fixture(scope="session")
def duck():
    return duck_curve()


@pytest.fixture(scope="session")
def limits():
    return SecurityLimits()
