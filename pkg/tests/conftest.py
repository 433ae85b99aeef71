import numpy as np
import pytest
from hypothesis import settings

# first calls pay for JIT compilation
settings.register_profile("default", deadline=None)
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
