import pytest

from privq.group import DlogTable, get_group
from privq.rng import Drbg


@pytest.fixture(scope="session")
def ed():
    return get_group("ed25519")


@pytest.fixture(scope="session")
def pg():
    return get_group("pairing80")


@pytest.fixture()
def rng():
    return Drbg("test-fixture")


@pytest.fixture(scope="session")
def ed_table(ed):
    return DlogTable(ed, 1 << 20)


@pytest.fixture(scope="session")
def pg_table(pg):
    return DlogTable(pg, 1 << 16)
