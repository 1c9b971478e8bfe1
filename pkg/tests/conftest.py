import numpy as np
import pytest

from svdwbc.algebra import AnisotropyParam


@pytest.fixture
def gamma():
    return AnisotropyParam(0.6)


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
