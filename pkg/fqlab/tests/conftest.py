"""
Shared fixtures for the fqlab test suite.
"""

import itertools
import os

import pytest

from fqlab.engine.gf import build_field
from fqlab.engine.tensor import FqTensor, family
from fqlab.observability import configure_logging


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: performance gates, run with FQLAB_RUN_SLOW=1")


def pytest_collection_modifyitems(config, items):
    if os.environ.get("FQLAB_RUN_SLOW") == "1":
        return
    skip_slow = pytest.mark.skip(reason="set FQLAB_RUN_SLOW=1 to run")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture(autouse=True)
def quiet_logging():
    # main() rebinds the log stream to the captured stderr; reset it around every test
    configure_logging(json_format=True, level="CRITICAL")
    yield
    configure_logging(json_format=True, level="CRITICAL")


@pytest.fixture
def gf2():
    return build_field(2)


@pytest.fixture
def gf3():
    return build_field(3)


@pytest.fixture
def gf4():
    return build_field(2, 2)


@pytest.fixture
def gf8():
    return build_field(2, 3)


@pytest.fixture
def w_tensor(gf2):
    return family("W", gf2)


@pytest.fixture
def companion_tensor(gf2):
    return family("companion", gf2)


def all_binary_222():
    F = build_field(2)
    return [FqTensor.from_entries(F, (2, 2, 2), bits) for bits in itertools.product((0, 1), repeat=8)]


@pytest.fixture(scope="session")
def all_2x2x2():
    return all_binary_222()
