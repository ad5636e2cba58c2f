import pytest

from cardkit.catalog import drone_catalog


@pytest.fixture(scope="session")
def catalog():
    return drone_catalog()
