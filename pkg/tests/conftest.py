import os
import sys

import pytest
from hypothesis import HealthCheck, settings

# Make `ethseq` and the root `config` module importable without installing
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), "..")))

# Property tests call numba kernels whose first call compiles
settings.register_profile(
    "dev", max_examples=50, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.register_profile(
    "ci",
    max_examples=200,
    deadline=None,
    derandomize=True,
    suppress_health_check=[HealthCheck.too_slow],
)


def pytest_addoption(parser):
    parser.addoption(
        "--runslow",
        action="store_true",
        default=False,
        help="run slow tests (directional training checks and profiling)",
    )
    parser.addoption(
        "--ci",
        action="store_true",
        default=False,
        help="indicate running in CI environment; property tests become deterministic",
    )


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: mark test as slow to run")
    config.addinivalue_line("markers", "ci: mark test to run only in CI environment")
    settings.load_profile("ci" if config.getoption("--ci") else "dev")


def pytest_collection_modifyitems(config, items):
    runslow = config.getoption("--runslow")
    ci = config.getoption("--ci")
    skip_slow = pytest.mark.skip(reason="need --runslow option to run")
    skip_ci = pytest.mark.skip(reason="need --ci option to run")
    for item in items:
        if not runslow and "slow" in item.keywords:
            item.add_marker(skip_slow)
        elif not ci and "ci" in item.keywords:
            item.add_marker(skip_ci)
