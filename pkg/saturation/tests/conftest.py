"""
Shared pytest configuration.

Full-size Monte Carlo oracles and boundary searches are marked ``slow`` and
run only with --runslow.
"""
import pytest


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="run slow Monte Carlo oracles")


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: full-size Monte Carlo or boundary search")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)
