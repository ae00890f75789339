import numpy as np
import pytest

from otfs_sensing.otfs_modem import CommConfig, FrameLayout


def crandn(rng, *shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def rel_err(a, b):
    a, b = np.asarray(a), np.asarray(b)
    denom = np.linalg.norm(b)
    return np.linalg.norm(a - b) / (denom if denom else 1.0)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def small_cfg():
    return CommConfig(M=8, N=4, N_CP=2, A=2)


@pytest.fixture
def small_layout():
    return FrameLayout(M=8, M_p=2, M_g=2)
