import numpy as np
import pytest
from scipy.spatial.distance import pdist

from conftest import ball_points, unit_sphere_cloud
from kernelsurf.core import OrientedPointCloud, make_rng
from kernelsurf.kernels import GaussianKernel, UniformKernel
from kernelsurf.solver import (Count, GramSystem, ImplicitField, Radius, SolverConfig, SolverError, assemble_gram,
                               data_residual, evaluate, gram_matrix, rkhs_norm, select_nystrom_centers,
                               select_nystrom_indices, solve)

G = GaussianKernel()


def random_cloud(rng, n, radius=0.6, d=3):
    return OrientedPointCloud(ball_points(rng, n, d, radius), rng.standard_normal((n, d)))


def test_single_sample_gram_is_the_diagonal_block():
    x = np.array([[0.1, -0.2, 0.3]])
    s = assemble_gram(OrientedPointCloud(x, [[0, 0, 1]]), x, G)
    assert s.matrix.shape == (4, 4)
    assert np.array_equal(s.matrix, G.blocks(x, x)[0, 0])
    assert np.array_equal(s.rhs, [0, 0, 0, 1])


def test_duplicate_sample_makes_gram_singular():
    p = [[0.1, 0.2, 0.3], [-0.3, 0.1, 0.2], [-0.3, 0.1, 0.2]]
    s = assemble_gram(OrientedPointCloud(p, np.ones((3, 3))), p, G)
    w = np.linalg.eigvalsh(s.matrix)
    assert np.min(np.abs(w)) <= 1e-8 * np.abs(w).max()


def test_gram_blocks_match_direct_calls(rng):
    cloud = random_cloud(rng, 5)
    centers = ball_points(rng, 4, 3, 0.5)
    K = assemble_gram(cloud, centers, UniformKernel()).kernel_matrix
    for j in range(5):
        for i in range(4):
            ref = UniformKernel().blocks(cloud.points[j], centers[i])[0, 0]
            assert np.array_equal(K[4 * j:4 * j + 4, 4 * i:4 * i + 4], ref)


def test_ridge_goes_on_the_diagonal(rng):
    cloud = random_cloud(rng, 4)
    s = assemble_gram(cloud, cloud.points, G, lam=0.5)
    assert np.allclose(s.matrix - s.kernel_matrix, 0.5 * np.eye(16))
    rect = assemble_gram(cloud, cloud.points[:2], G, lam=0.5)
    assert not rect.square and np.array_equal(rect.matrix, rect.kernel_matrix)


def test_value_only_system(rng):
    cloud = random_cloud(rng, 6)
    s = assemble_gram(cloud, cloud.points, G, use_gradients=False)
    assert s.matrix.shape == (6, 6)
    f = solve(s)
    assert np.allclose(f(cloud.points), 0, atol=1e-9)


def test_interpolation(rng):
    cloud = random_cloud(rng, 60)
    system = assemble_gram(cloud, cloud.points, G)
    field = solve(system, SolverConfig())
    f, g = field.evaluate_batch(cloud.points)
    assert np.max(np.abs(f - cloud.values)) <= 1e-6
    assert np.max(np.linalg.norm(g - cloud.normals, axis=1)) <= 1e-5
    f0, g0 = evaluate(field, cloud.points[3])
    assert abs(f0) <= 1e-6 and np.allclose(g0, cloud.normals[3], atol=1e-5)


def test_singular_direct_solve_raises():
    p = [[0.1, 0.2, 0.3], [-0.3, 0.1, 0.2], [-0.3, 0.1, 0.2]]
    s = assemble_gram(OrientedPointCloud(p, [[0, 0, 1], [1, 0, 0], [1, 0, 0]]), p, G)
    with pytest.raises(SolverError):
        solve(s, SolverConfig(method="direct"))


def test_cg_failure_reports_residual(rng):
    cloud = random_cloud(rng, 30)
    s = assemble_gram(cloud, cloud.points, G)
    with pytest.raises(SolverError) as err:
        solve(s, SolverConfig(method="cg", max_iter=2))
    assert np.isfinite(err.value.residual_norm) and err.value.residual_norm > 0


def test_nystrom_with_all_centers_matches_full_solve(rng):
    cloud = random_cloud(rng, 40)
    full = solve(assemble_gram(cloud, cloud.points, G))
    centers = select_nystrom_centers(cloud, Count(40))
    assert np.array_equal(centers, cloud.points)
    rect = GramSystem(gram_matrix(G, cloud.points, centers[::-1]),
                      np.column_stack([cloud.values, cloud.normals]).ravel(), centers[::-1], cloud.points, G)
    assert not rect.square
    nys = solve(rect)
    a, b = full.evaluate_batch(cloud.points), nys.evaluate_batch(cloud.points)
    scale = max(np.abs(a[1]).max(), 1.0)
    assert np.max(np.abs(a[0] - b[0])) <= 1e-6 * scale
    assert np.max(np.abs(a[1] - b[1])) <= 1e-6 * scale


def test_huge_ridge_shrinks_coefficients(rng):
    cloud = random_cloud(rng, 20)
    s = assemble_gram(cloud, cloud.points, G)
    lam = 1e6 * np.linalg.norm(s.kernel_matrix, 2)
    a0 = solve(s, SolverConfig()).coefficients
    a1 = solve(s, SolverConfig(lam=lam)).coefficients
    assert np.linalg.norm(a1) <= 1e-3 * np.linalg.norm(a0)


def test_ridge_residual_is_monotone():
    cloud = unit_sphere_cloud(120, seed=4, radius=0.6)
    noisy = OrientedPointCloud(cloud.points + 0.02 * make_rng(9).standard_normal((120, 3)), cloud.normals)
    s = assemble_gram(noisy, noisy.points, G)
    res = [data_residual(solve(s, SolverConfig(lam=lam)), s) for lam in (0, 1e-8, 1e-6, 1e-4, 1e-2)]
    assert all(b >= a - 1e-12 for a, b in zip(res, res[1:]))


def test_cg_agrees_with_direct(rng):
    cloud = random_cloud(rng, 30)
    s = assemble_gram(cloud, cloud.points, G)
    cfg = dict(lam=1e-3, tol=1e-10, max_iter=5000)
    a = solve(s, SolverConfig(method="direct", **cfg))
    b = solve(s, SolverConfig(method="cg", **cfg))
    A = s.matrix
    diff = A @ a.coefficients.ravel() - A @ b.coefficients.ravel()
    assert np.max(np.abs(diff)) <= 10 * 1e-10 * np.linalg.norm(s.rhs)
    assert b.info["method"] == "cg"


def test_permutation_equivariance(rng):
    cloud = random_cloud(rng, 25)
    perm = rng.permutation(25)
    q = ball_points(rng, 10, 3, 0.7)
    f1 = solve(assemble_gram(cloud, cloud.points, G))
    shuffled = cloud.subset(perm)
    s2 = assemble_gram(shuffled, shuffled.points, G)
    f2 = solve(s2)
    assert np.allclose(f2.coefficients, f1.coefficients[perm], atol=1e-8)
    assert np.allclose(f1(q), f2(q), atol=1e-9)
    s1 = assemble_gram(cloud, cloud.points, G)
    assert rkhs_norm(f1, s1) == pytest.approx(rkhs_norm(f2, s2), rel=1e-9)


def test_field_gradient_matches_differences(rng):
    cloud = random_cloud(rng, 30)
    field = solve(assemble_gram(cloud, cloud.points, G))
    h = 1e-5
    for x in ball_points(rng, 50, 3, 0.8):
        _, g = evaluate(field, x)
        fd = np.array([(field(x + e)[0] - field(x - e)[0]) / (2 * h) for e in np.eye(3) * h])
        assert np.max(np.abs(fd - g)) <= 1e-4 * max(np.abs(g).max(), 1e-8)


def test_zero_field():
    f = ImplicitField(np.zeros((3, 3)), np.zeros((3, 4)), G)
    val, grad = evaluate(f, np.array([0.1, 0.2, 0.3]))
    assert val == 0 and np.array_equal(grad, np.zeros(3))
    with pytest.raises(ValueError):
        ImplicitField(np.zeros((3, 3)), np.zeros((2, 4)), G)


def test_rkhs_norm_zero_and_errors(rng):
    cloud = random_cloud(rng, 5)
    s = assemble_gram(cloud, cloud.points, G)
    zero = ImplicitField(cloud.points, np.zeros((5, 4)), G)
    assert rkhs_norm(zero, s) == 0.0
    rect = assemble_gram(cloud, cloud.points[:3], G)
    with pytest.raises(ValueError):
        rkhs_norm(ImplicitField(cloud.points[:3], np.ones((3, 4)), G), rect)
    bad = GramSystem(-np.eye(20), s.rhs, s.centers, s.samples, G)
    with pytest.raises(ValueError, match="PSD"):
        rkhs_norm(ImplicitField(cloud.points, np.ones((5, 4)), G), bad)


def test_minimum_norm_under_null_space_perturbations():
    p = [[0.1, 0.2, 0.3], [-0.3, 0.1, 0.2], [-0.3, 0.1, 0.2]]
    cloud = OrientedPointCloud(p, [[0, 0, 1], [1, 0, 0], [1, 0, 0]])
    s = assemble_gram(cloud, cloud.points, G)
    field = solve(s, SolverConfig(method="cg"))
    base = rkhs_norm(field, s)
    K = s.kernel_matrix
    w, V = np.linalg.eigh(K)
    null = V[:, np.abs(w) <= 1e-10 * w.max()]
    assert null.shape[1] >= 1
    rng = np.random.default_rng(0)
    for _ in range(100):
        a = field.coefficients.ravel() + null @ rng.normal(size=null.shape[1])
        assert np.allclose(K @ a, s.rhs, atol=1e-8)
        other = ImplicitField(cloud.points, a.reshape(3, 4), G)
        assert base <= rkhs_norm(other, s) + 1e-7


def test_config_validation():
    with pytest.raises(ValueError):
        SolverConfig(lam=-1)
    with pytest.raises(ValueError):
        SolverConfig(tol=0)
    with pytest.raises(ValueError):
        SolverConfig(method="qr")
    with pytest.raises(ValueError):
        SolverConfig(nystrom=Count(0))


# --------------------------------------------------------------------- centers

def test_count_equal_to_size_returns_everything(rng):
    cloud = random_cloud(rng, 30)
    assert np.array_equal(select_nystrom_indices(cloud, Count(30)), np.arange(30))
    with pytest.raises(ValueError):
        select_nystrom_indices(cloud, Count(31))


def test_radius_excludes_close_pair():
    pts = np.array([[0, 0, 0], [0.01, 0, 0], [1, 0, 0], [0, 1, 0]], dtype=float)
    idx = select_nystrom_indices(OrientedPointCloud(pts, np.ones((4, 3))), Radius(0.1))
    assert len(idx) == 3
    assert len(set(idx.tolist()) & {0, 1}) == 1


def test_radius_spacing_holds(rng):
    cloud = random_cloud(rng, 500)
    centers = select_nystrom_centers(cloud, Radius(0.15), make_rng(2))
    assert pdist(centers).min() >= 0.15


def test_blue_noise_count_on_sphere():
    cloud = unit_sphere_cloud(10_000, seed=1)
    centers = select_nystrom_centers(cloud, Count(1000), make_rng(3))
    assert len(centers) == 1000
    assert len(np.unique(centers, axis=0)) == 1000
    # hexagonal packing density
    ideal = np.sqrt(4 * np.pi * (np.pi / (2 * np.sqrt(3))) / 1000)
    dmin = pdist(centers).min()
    assert ideal / 2 <= dmin <= 2 * ideal
    again = select_nystrom_centers(cloud, Count(1000), make_rng(3))
    assert np.array_equal(centers, again)


def test_padding_reaches_exact_count():
    # a tight cluster plus a few far points: bisection cannot land on 7, farthest-point fill must
    rng = np.random.default_rng(0)
    pts = np.vstack([rng.normal(size=(50, 3)) * 1e-3, np.eye(3) * 5])
    idx = select_nystrom_indices(OrientedPointCloud(pts, np.ones((53, 3))), Count(7))
    assert len(idx) == 7 and len(set(idx.tolist())) == 7
