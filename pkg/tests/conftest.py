"""Shared fixtures: import path, seeded generators and the slow-test switch"""

import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / 'src'))

from recmax.utils.parallel import make_rng  # noqa: E402


def pytest_addoption(parser):
    parser.addoption('--runslow', action='store_true', default=False,
                     help='run acceptance-scale statistical tests')


def pytest_configure(config):
    config.addinivalue_line('markers', 'slow: acceptance-scale test, needs --runslow')


def pytest_collection_modifyitems(config, items):
    if config.getoption('--runslow'):
        return
    skip = pytest.mark.skip(reason='needs --runslow')
    for item in items:
        if 'slow' in item.keywords:
            item.add_marker(skip)


@pytest.fixture
def rng():
    return make_rng(12345)


@pytest.fixture
def rng_factory():
    """Independent generators for one test: rng_factory(k) -> Generator."""
    return lambda k: make_rng(12345, k)
