import numpy as np
import pytest

from habitat_semigroup import HabitatConfig

DEFAULT = dict(ell=1.0, L=1.5, d_minus=0.1, d_plus=0.05, r_minus=0.2, r_plus=0.4, q=0.02,
               n_transversal=16, n_long_minus=41, n_long_plus=61)


def make_cfg(**kw) -> HabitatConfig:
    return HabitatConfig(**{**DEFAULT, **kw})


@pytest.fixture
def cfg():
    return make_cfg()


@pytest.fixture
def small_cfg():
    return make_cfg(n_transversal=6, n_long_minus=21, n_long_plus=31)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def smooth(x, y):
    return np.cos(2 * x) * np.sin(np.pi * y) + x * y * (1 - y)
