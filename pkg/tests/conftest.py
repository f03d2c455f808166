import numpy as np
import pytest

from kernelsurf.core import OrientedPointCloud, make_rng


def unit_sphere_cloud(n, seed=0, radius=1.0):
    rng = make_rng(seed)
    p = rng.standard_normal((n, 3))
    p /= np.linalg.norm(p, axis=1)[:, None]
    return OrientedPointCloud(radius * p, p)


def sphere_surface_points(n, seed=12345, radius=1.0):
    p = np.random.default_rng(seed).standard_normal((n, 3))
    return radius * p / np.linalg.norm(p, axis=1)[:, None]


def ball_points(rng, n, d, radius):
    """Uniform samples from the ball of the given radius."""
    p = rng.standard_normal((n, d))
    p /= np.linalg.norm(p, axis=1)[:, None]
    return p * (radius * rng.random(n) ** (1.0 / d))[:, None]


@pytest.fixture
def rng():
    return np.random.default_rng(20261016)
