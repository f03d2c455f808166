"""Dense grid evaluation and zero-level-set extraction."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from skimage import measure

#: Fraction of the bounding-box extent added on every side of the grid.
GRID_PADDING = 0.1


@dataclass(frozen=True)
class TriangleMesh:
    vertices: np.ndarray
    triangles: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=float).reshape(-1, 3)
        t = np.asarray(self.triangles, dtype=np.int64).reshape(-1, 3)
        if t.size and (t.min() < 0 or t.max() >= len(v)):
            raise ValueError("triangle index out of range")
        if t.size and np.any((t[:, 0] == t[:, 1]) | (t[:, 1] == t[:, 2]) | (t[:, 0] == t[:, 2])):
            raise ValueError("degenerate triangle")
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "triangles", t)

    @classmethod
    def empty(cls) -> TriangleMesh:
        return cls(np.zeros((0, 3)), np.zeros((0, 3), dtype=np.int64))

    @property
    def is_empty(self) -> bool:
        return len(self.triangles) == 0

    def areas(self) -> np.ndarray:
        a, b, c = (self.vertices[self.triangles[:, i]] for i in range(3))
        return 0.5 * np.linalg.norm(np.cross(b - a, c - a), axis=1)

    def signed_volume(self) -> float:
        """Positive when triangles are wound counter-clockwise seen from outside."""
        a, b, c = (self.vertices[self.triangles[:, i]] for i in range(3))
        return float(np.einsum("ij,ij->i", a, np.cross(b, c)).sum() / 6.0)

    def edge_counts(self) -> dict:
        """How many triangles use each undirected edge."""
        e = np.concatenate([self.triangles[:, [0, 1]], self.triangles[:, [1, 2]], self.triangles[:, [2, 0]]])
        e = np.sort(e, axis=1)
        keys, counts = np.unique(e, axis=0, return_counts=True)
        return {tuple(k): int(c) for k, c in zip(keys, counts)}

    def is_closed(self) -> bool:
        return not self.is_empty and all(c == 2 for c in self.edge_counts().values())


@dataclass(frozen=True)
class ScalarGrid:
    """Samples on a regular lattice; ``values`` is flat in x-fastest order."""

    resolution: tuple
    origin: np.ndarray
    spacing: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        res = tuple(int(r) for r in self.resolution)
        if len(res) != 3 or min(res) < 2:
            raise ValueError("resolution must have three components >= 2")
        spacing = np.asarray(self.spacing, dtype=float)
        if np.any(spacing <= 0):
            raise ValueError("spacing must be positive")
        values = np.asarray(self.values, dtype=float).ravel()
        if values.size != np.prod(res):
            raise ValueError("value count does not match resolution")
        if not np.all(np.isfinite(values)):
            raise ValueError("non-finite grid value")
        object.__setattr__(self, "resolution", res)
        object.__setattr__(self, "origin", np.asarray(self.origin, dtype=float))
        object.__setattr__(self, "spacing", spacing)
        object.__setattr__(self, "values", values)

    def volume(self) -> np.ndarray:
        """Values as an ``(nx, ny, nz)`` array indexed ``[i, j, k]``."""
        nx, ny, nz = self.resolution
        return self.values.reshape(nz, ny, nx).transpose(2, 1, 0)

    def cell_diagonal(self) -> float:
        return float(np.linalg.norm(self.spacing))


def lattice_points(bbox, resolution) -> np.ndarray:
    """Lattice points of ``bbox = (lo, hi)`` in x-fastest order."""
    lo, hi = (np.asarray(b, dtype=float) for b in bbox)
    res = _resolution(resolution)
    axes = [np.linspace(lo[i], hi[i], res[i]) for i in range(3)]
    zz, yy, xx = np.meshgrid(axes[2], axes[1], axes[0], indexing="ij")
    return np.column_stack([xx.ravel(), yy.ravel(), zz.ravel()])


def _resolution(resolution):
    res = (resolution,) * 3 if np.isscalar(resolution) else tuple(resolution)
    if len(res) != 3 or min(res) < 2:
        raise ValueError("resolution must be >= 2 per axis")
    return tuple(int(r) for r in res)


def padded_bbox(points, padding: float = GRID_PADDING):
    """Bounding box of ``points`` grown by ``padding`` times its extent on each side."""
    points = np.asarray(points, dtype=float)
    lo, hi = points.min(axis=0), points.max(axis=0)
    ext = hi - lo
    # a flat or single-point cloud still needs a box with volume
    ext = np.where(ext > 0, ext, max(float(ext.max()), 1e-3))
    return lo - padding * ext, hi + padding * ext


def evaluate_grid(field, bbox, resolution) -> ScalarGrid:
    """Sample ``field`` (anything mapping ``(n, 3)`` points to ``(n,)`` values) on a lattice."""
    lo, hi = (np.asarray(b, dtype=float) for b in bbox)
    res = _resolution(resolution)
    spacing = (hi - lo) / (np.asarray(res) - 1)
    values = np.asarray(field(lattice_points((lo, hi), res)), dtype=float)
    return ScalarGrid(res, lo, spacing, values)


def marching_cubes(grid: ScalarGrid, iso: float = 0.0) -> TriangleMesh:
    """Triangulate ``{p : f(p) = iso}`` with classic marching cubes.

    Triangles are wound so their normals point toward increasing values
    (outward for fields that are negative inside).
    """
    vol = grid.volume()
    if vol.min() >= iso or vol.max() <= iso:
        return TriangleMesh.empty()
    verts, faces, _, _ = measure.marching_cubes(vol, level=iso, method="lorensen", allow_degenerate=False)
    verts = grid.origin + verts * grid.spacing
    keep = (faces[:, 0] != faces[:, 1]) & (faces[:, 1] != faces[:, 2]) & (faces[:, 0] != faces[:, 2])
    return TriangleMesh(verts, faces[keep])
