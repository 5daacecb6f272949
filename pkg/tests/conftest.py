import numpy as np
import pytest


def pytest_configure(config):
    config.addinivalue_line(
        "markers", "slow: multi-seed statistical checks (minutes, not seconds)"
    )


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
