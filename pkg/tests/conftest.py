import pytest

from hourglass import CacheGeometry, SimConfig
from hourglass.verify import explore

VERIFY_CONFIG = SimConfig(n_cr=2, n_ncr=1, cache_geometry=CacheGeometry(sets=1))


@pytest.fixture(scope="session")
def verify_config():
    return VERIFY_CONFIG


@pytest.fixture(scope="session")
def verify_two_lines():
    # the largest exhaustive scope; shared because it takes about a minute
    return explore(VERIFY_CONFIG, n_lines=2, depth=3)
