import math

import numpy as np
import pytest

from bose_ldp.model import ModelParams

BETA_UNIT = 1.0 / (4.0 * math.pi)


@pytest.fixture
def p3():
    """d = 3 at the inverse temperature where q_k = k^{-5/2} exactly."""
    return ModelParams(d=3, beta=BETA_UNIT)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
