import numpy as np
import pytest

from trajpriv.grid import GridMap


@pytest.fixture
def grid10():
    return GridMap(10, 10, 5.0)


@pytest.fixture
def line4():
    return GridMap(4, 1, 5.0)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
