"""Chamfer and Hausdorff distances between sampled surfaces, and volumetric IoU."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .core import make_rng
from .extraction import lattice_points


@dataclass(frozen=True)
class SampledSurface:
    points: np.ndarray
    source: str = "raw-cloud"  # or "mesh-sampled"

    def __post_init__(self):
        pts = np.atleast_2d(np.asarray(self.points, dtype=float))
        if pts.shape[0] == 0:
            raise ValueError("sampled surface is empty")
        if not np.all(np.isfinite(pts)):
            raise ValueError("non-finite sample")
        object.__setattr__(self, "points", pts)


def _points(s):
    return s.points if isinstance(s, SampledSurface) else SampledSurface(s).points


def sample_mesh(mesh, n: int, rng=None) -> SampledSurface:
    """``n`` points drawn area-proportionally, uniform within each triangle."""
    if mesh.is_empty:
        raise ValueError("cannot sample an empty mesh")
    rng = make_rng(0) if rng is None else rng
    areas = mesh.areas()
    tri = rng.choice(len(areas), size=n, p=areas / areas.sum())
    u, v = rng.random(n), rng.random(n)
    flip = u + v > 1
    u[flip], v[flip] = 1 - u[flip], 1 - v[flip]
    a, b, c = (mesh.vertices[mesh.triangles[tri, i]] for i in range(3))
    return SampledSurface(a + u[:, None] * (b - a) + v[:, None] * (c - a), "mesh-sampled")


def nearest_distances(a, b) -> np.ndarray:
    """Distance from every point of ``a`` to its nearest neighbor in ``b``."""
    return cKDTree(_points(b)).query(_points(a), k=1)[0]


def chamfer(a, b, one_sided: bool = False) -> float:
    """Mean nearest-neighbor distance; the two-sided value averages both directions."""
    ab = float(np.mean(nearest_distances(a, b)))
    if one_sided:
        return ab
    return 0.5 * (ab + float(np.mean(nearest_distances(b, a))))


def hausdorff(a, b, one_sided: bool = False) -> float:
    ab = float(np.max(nearest_distances(a, b)))
    if one_sided:
        return ab
    return max(ab, float(np.max(nearest_distances(b, a))))


def volumetric_iou(inside_a, inside_b, bbox, resolution: int = 64) -> float:
    """IoU of two occupancy predicates sampled at voxel centres of ``bbox``.

    Predicates map ``(n, 3)`` points to booleans (typically ``f(p) < 0``).
    Two empty sets count as identical.
    """
    res = (resolution,) * 3 if np.isscalar(resolution) else tuple(resolution)
    if min(res) < 16:
        raise ValueError("IoU resolution must be >= 16 per axis")
    lo, hi = (np.asarray(x, dtype=float) for x in bbox)
    half = 0.5 * (hi - lo) / np.asarray(res)
    pts = lattice_points((lo + half, hi - half), res)
    A = np.asarray(inside_a(pts), dtype=bool)
    B = np.asarray(inside_b(pts), dtype=bool)
    union = np.count_nonzero(A | B)
    if union == 0:
        return 1.0
    return np.count_nonzero(A & B) / union


def unit_cube_transform(points):
    """``(offset, scale)`` mapping the bounding box of ``points`` into ``[0, 1]^3``."""
    points = np.asarray(points, dtype=float)
    lo = points.min(axis=0)
    ext = float((points.max(axis=0) - lo).max())
    return lo, (ext if ext > 0 else 1.0)
