import numpy as np
import pytest

from simwave.geometry import SimGeometry, drop_users
from simwave.propagation import build_operators, channel_statistics
from simwave.scene import Scene


def make_scene(n_x=4, n_y=2, layers=2, users=2, antennas=None, seed=0, kappa=1.0,
               frequency=2e9):
    g = SimGeometry.from_frequency(frequency, antennas or users, users, layers, n_x, n_y)
    layout = drop_users(g, 60, 80, seed)
    return Scene(g, build_operators(g), channel_statistics(g, layout, kappa=kappa))


@pytest.fixture
def scene():
    return make_scene()


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
