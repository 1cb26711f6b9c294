import numpy as np
import pytest

from aoi_llrl.env import Task


@pytest.fixture
def task():
    return Task(lam=2.0, abar=2e7, avar=5e6, alpha=1e-21, eps_max=6e6)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
