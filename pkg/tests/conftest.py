import numpy as np
import pytest

from hinftrack.cli import demo_config_path
from hinftrack.config import load_config
from hinftrack.topology import Adjacency, build_stochastic, follower_spectrum

DEMO_ADJ = np.array([
    [0.0, 0.0, 0.0, 0.0, 0.0],
    [1.2, 0.0, 2.0, 0.0, 0.0],
    [0.0, 2.0, 0.0, 0.0, 0.0],
    [1.5, 0.0, 0.0, 0.0, 1.9],
    [0.0, 0.0, 0.0, 1.9, 0.0],
])
REFERENCE_F = np.array([[0.0003], [0.0551], [0.4660]])


@pytest.fixture(scope="session")
def demo_cfg():
    return load_config(demo_config_path())


@pytest.fixture(scope="session")
def demo_aug(demo_cfg):
    return demo_cfg.augmented()


@pytest.fixture(scope="session")
def demo_adj():
    return Adjacency(DEMO_ADJ)


@pytest.fixture(scope="session")
def demo_dec(demo_adj):
    return build_stochastic(demo_adj, 0.20)


@pytest.fixture(scope="session")
def demo_spec(demo_dec):
    return follower_spectrum(demo_dec)
