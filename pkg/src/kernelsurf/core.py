"""Point-cloud containers, coordinate normalization and seeded randomness."""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np

#: Radius of the origin-centred ball that normalized clouds are mapped into.
NORMALIZED_RADIUS = 0.7


def make_rng(seed: int = 0) -> np.random.Generator:
    """Return the generator used for every stochastic step.

    Philox is counter based, so a given seed produces the same stream on every
    platform and numpy build.
    """
    return np.random.Generator(np.random.Philox(int(seed) & (2**64 - 1)))


@dataclass(frozen=True)
class OrientedPointCloud:
    """Sample positions with outward unit normals and target values.

    Normals are renormalized on construction; zero-length normals raise.
    """

    points: np.ndarray
    normals: np.ndarray
    values: np.ndarray | None = None

    def __post_init__(self):
        pts = np.atleast_2d(np.asarray(self.points, dtype=float))
        nrm = np.atleast_2d(np.asarray(self.normals, dtype=float))
        if pts.ndim != 2 or pts.shape[0] < 1:
            raise ValueError("cloud needs at least one point")
        if nrm.shape != pts.shape:
            raise ValueError(f"normals shape {nrm.shape} != points shape {pts.shape}")
        if not np.all(np.isfinite(pts)):
            raise ValueError("non-finite point coordinate")
        if not np.all(np.isfinite(nrm)):
            raise ValueError("non-finite normal")
        lengths = np.linalg.norm(nrm, axis=1)
        if np.any(lengths <= 1e-12):
            raise ValueError("zero-length normal")
        vals = np.zeros(len(pts)) if self.values is None else np.asarray(self.values, dtype=float).ravel()
        if vals.shape != (len(pts),):
            raise ValueError("values must have one entry per point")
        if not np.all(np.isfinite(vals)):
            raise ValueError("non-finite target value")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "normals", nrm / lengths[:, None])
        object.__setattr__(self, "values", vals)

    def __len__(self):
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def subset(self, idx) -> OrientedPointCloud:
        idx = np.asarray(idx)
        return OrientedPointCloud(self.points[idx], self.normals[idx], self.values[idx])


@dataclass(frozen=True)
class NormalizationTransform:
    """Similarity ``p -> (p - center) / scale``."""

    center: np.ndarray
    scale: float

    def __post_init__(self):
        object.__setattr__(self, "center", np.asarray(self.center, dtype=float))
        if not self.scale > 0:
            raise ValueError("scale must be positive")

    @classmethod
    def identity(cls, dim: int = 3) -> NormalizationTransform:
        return cls(np.zeros(dim), 1.0)

    def apply(self, points):
        return (np.asarray(points, dtype=float) - self.center) / self.scale

    def inverse(self, points):
        return np.asarray(points, dtype=float) * self.scale + self.center


def normalize(cloud: OrientedPointCloud) -> tuple[OrientedPointCloud, NormalizationTransform]:
    """Map a cloud into the ball of radius ``NORMALIZED_RADIUS`` about the origin.

    The bounding-box center goes to the origin and the box half-diagonal is
    scaled to the target radius, so the whole box (not just the samples) ends
    up inside the ball. A single point is mapped to the origin with unit scale.
    """
    pts = cloud.points
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    center = 0.5 * (lo + hi)
    half_diag = 0.5 * np.linalg.norm(hi - lo)
    if len(cloud) == 1:
        scale = 1.0
    elif half_diag <= 0.0:
        raise ValueError("zero extent")
    else:
        scale = half_diag / NORMALIZED_RADIUS
    t = NormalizationTransform(center, scale)
    return OrientedPointCloud(t.apply(pts), cloud.normals, cloud.values), t


def denormalize_mesh(mesh, t: NormalizationTransform):
    """Map mesh vertices from normalized back to world coordinates."""
    verts = np.asarray(mesh.vertices, dtype=float)
    if verts.size == 0:
        return mesh
    return dataclasses.replace(mesh, vertices=t.inverse(verts))
