import numpy as np
import pytest

from kwcscheme.discrete_ops import make_field


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_field(rng, K, scale=1.0, offset=0.0):
    return make_field(offset + scale * rng.standard_normal(K + 1))
