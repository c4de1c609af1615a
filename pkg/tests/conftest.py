import warnings

import numpy as np
import pytest

warnings.filterwarnings("ignore", message=".*integral.*")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
