import numpy as np
import pytest

from tests.helpers import make_checkpoint, make_field


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def small_field():
    return make_field()


@pytest.fixture
def small_checkpoint():
    return make_checkpoint()
