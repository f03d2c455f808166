import numpy as np
import pytest

from kernelsurf.core import make_rng
from kernelsurf.extraction import TriangleMesh
from kernelsurf.metrics import (SampledSurface, chamfer, hausdorff, nearest_distances, sample_mesh,
                                unit_cube_transform, volumetric_iou)


def brute_nn(a, b):
    return np.sqrt(((a[:, None, :] - b[None, :, :]) ** 2).sum(-1)).min(axis=1)


def test_self_distance_is_zero(rng):
    a = rng.normal(size=(100, 3))
    assert chamfer(a, a) == 0 and hausdorff(a, a) == 0


def test_single_pair():
    a, b = [[0, 0, 0]], [[1, 0, 0]]
    for fn in (chamfer, hausdorff):
        assert fn(a, b) == 1.0 and fn(a, b, one_sided=True) == 1.0


@pytest.mark.parametrize("seed", range(5))
def test_against_brute_force(seed):
    rng = np.random.default_rng(seed)
    a, b = rng.normal(size=(300, 3)), rng.normal(size=(400, 3)) + 0.3
    ab, ba = brute_nn(a, b), brute_nn(b, a)
    assert np.allclose(nearest_distances(a, b), ab, atol=1e-12)
    assert abs(chamfer(a, b, one_sided=True) - ab.mean()) <= 1e-12
    assert abs(chamfer(a, b) - 0.5 * (ab.mean() + ba.mean())) <= 1e-12
    assert abs(hausdorff(a, b) - max(ab.max(), ba.max())) <= 1e-12
    assert hausdorff(a, b, one_sided=True) >= chamfer(a, b, one_sided=True)
    assert chamfer(a, b) == chamfer(b, a) and hausdorff(a, b) == hausdorff(b, a)


def test_translation_invariance(rng):
    a, b = rng.normal(size=(200, 3)), rng.normal(size=(150, 3))
    t = np.array([5.0, -3.0, 11.0])
    assert chamfer(a + t, b + t) == pytest.approx(chamfer(a, b), abs=1e-9)
    assert hausdorff(a + t, b + t) == pytest.approx(hausdorff(a, b), abs=1e-9)


def test_sampled_surface_validation():
    with pytest.raises(ValueError):
        SampledSurface(np.zeros((0, 3)))
    with pytest.raises(ValueError):
        SampledSurface([[0, np.inf, 0]])


def test_single_triangle_samples_are_inside():
    tri = np.array([[0, 0, 0], [2, 0, 0], [0, 1, 0]], dtype=float)
    s = sample_mesh(TriangleMesh(tri, [[0, 1, 2]]), 5000, make_rng(0)).points
    # barycentric coordinates
    u = s[:, 0] / 2
    v = s[:, 1]
    assert np.all(u >= -1e-12) and np.all(v >= -1e-12) and np.all(u + v <= 1 + 1e-12)
    assert np.allclose(s[:, 2], 0)


def test_area_proportional_split():
    v = np.array([[0, 0, 0], [3, 0, 0], [0, 3, 0], [10, 0, 0], [11, 0, 0], [10, 1, 0]], dtype=float)
    mesh = TriangleMesh(v, [[0, 1, 2], [3, 4, 5]])  # areas 4.5 and 0.5
    n = 100_000
    s = sample_mesh(mesh, n, make_rng(1)).points
    big = np.count_nonzero(s[:, 0] < 5)
    sigma = np.sqrt(n * 0.9 * 0.1)
    assert abs(big - 0.9 * n) <= 4 * sigma


def test_sampling_is_deterministic():
    mesh = TriangleMesh([[0, 0, 0], [1, 0, 0], [0, 1, 0]], [[0, 1, 2]])
    assert np.array_equal(sample_mesh(mesh, 10, make_rng(3)).points, sample_mesh(mesh, 10, make_rng(3)).points)
    with pytest.raises(ValueError):
        sample_mesh(TriangleMesh.empty(), 10)


def test_iou_conventions():
    box = (np.full(3, -0.5), np.full(3, 0.5))
    ball = lambda p: np.linalg.norm(p, axis=1) < 0.3  # noqa: E731
    assert volumetric_iou(ball, ball, box, 32) == 1.0
    assert volumetric_iou(lambda p: p[:, 0] < -1, lambda p: p[:, 0] > 1, box, 16) == 1.0
    with pytest.raises(ValueError):
        volumetric_iou(ball, ball, box, 8)


def test_iou_concentric_spheres():
    box = (np.full(3, -0.6), np.full(3, 0.6))
    iou = volumetric_iou(lambda p: np.linalg.norm(p, axis=1) < 0.4, lambda p: np.linalg.norm(p, axis=1) < 0.5,
                         box, 128)
    assert iou == pytest.approx(0.512, abs=0.01)


def test_unit_cube_transform():
    lo, ext = unit_cube_transform([[1, 2, 3], [3, 3, 3]])
    assert np.array_equal(lo, [1, 2, 3]) and ext == 2.0
    assert unit_cube_transform([[1, 1, 1]])[1] == 1.0
