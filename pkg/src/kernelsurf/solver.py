"""Block Gram assembly, Nystrom center selection and the kernel ridge solve."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.sparse.linalg
from scipy.spatial import cKDTree

from .core import NormalizationTransform, OrientedPointCloud, make_rng
from .kernels import Kernel

log = logging.getLogger(__name__)

#: Row count above which ``method="auto"`` switches from a dense solve to CG.
DIRECT_MAX_ROWS = 8000
#: Relative ridge floor for the Nystrom normal equations (CG path) when lam == 0.
NYSTROM_RIDGE_FLOOR = 1e-10


class SolverError(RuntimeError):
    """Raised when a factorization fails or CG does not converge."""

    def __init__(self, message, residual_norm=float("nan")):
        super().__init__(f"{message} (residual norm {residual_norm:.3e})")
        self.residual_norm = residual_norm


@dataclass(frozen=True)
class Count:
    """Nystrom target: exactly ``m`` centers."""

    m: int


@dataclass(frozen=True)
class Radius:
    """Nystrom target: every pair of centers at least ``r`` apart."""

    r: float


@dataclass(frozen=True)
class SolverConfig:
    lam: float = 0.0
    method: str = "auto"  # "auto" | "direct" | "cg"
    max_iter: int = 1000
    tol: float = 1e-10
    nystrom: Count | Radius | None = None
    seed: int = 0

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError("lam must be >= 0")
        if self.tol <= 0:
            raise ValueError("tol must be > 0")
        if self.method not in ("auto", "direct", "cg"):
            raise ValueError(f"unknown method {self.method!r}")
        if isinstance(self.nystrom, Count) and self.nystrom.m < 1:
            raise ValueError("Nystrom count must be >= 1")


# ---------------------------------------------------------------------------
# Nystrom centers
# ---------------------------------------------------------------------------


def _greedy_disk(points, order, r):
    """Accept points in ``order`` unless an accepted point lies within ``r``."""
    if r <= 0:
        return np.asarray(order)
    tree = cKDTree(points)
    blocked = np.zeros(len(points), dtype=bool)
    accepted = []
    # only accepted points query the tree, so large radii stay cheap
    for i in order:
        if blocked[i]:
            continue
        accepted.append(i)
        blocked[tree.query_ball_point(points[i], r * (1 - 1e-12))] = True
    return np.asarray(accepted)


def _farthest_fill(points, chosen, m):
    chosen = list(chosen)
    dist = np.full(len(points), np.inf)
    for i in chosen:
        dist = np.minimum(dist, np.linalg.norm(points - points[i], axis=1))
    while len(chosen) < m:
        i = int(np.argmax(dist))
        chosen.append(i)
        dist = np.minimum(dist, np.linalg.norm(points - points[i], axis=1))
    return np.asarray(chosen)


def select_nystrom_indices(cloud: OrientedPointCloud, target: Count | Radius, rng=None) -> np.ndarray:
    """Indices of a blue-noise subset of the cloud (Poisson-disk sample elimination).

    Points are visited in a seeded random order and kept when no kept point
    lies within the exclusion radius. For a :class:`Count` target the radius
    is bisected until the kept count is within 10% of ``m``; the result is
    then truncated, or padded with farthest-point additions, to exactly ``m``.
    """
    rng = make_rng(0) if rng is None else rng
    pts = cloud.points
    s = len(pts)
    order = rng.permutation(s)
    if isinstance(target, Radius):
        return _greedy_disk(pts, order, target.r)
    m = int(target.m)
    if m > s:
        raise ValueError(f"cannot select {m} centers from {s} points")
    if m < 1:
        raise ValueError("Nystrom count must be >= 1")
    if m == s:
        return np.arange(s)
    lo, hi = 0.0, float(np.linalg.norm(pts.max(axis=0) - pts.min(axis=0))) + 1e-12
    best = _greedy_disk(pts, order, hi)
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        acc = _greedy_disk(pts, order, mid)
        if abs(len(acc) - m) < abs(len(best) - m):
            best = acc
        if abs(len(acc) - m) <= 0.1 * m:
            best = acc
            break
        if len(acc) > m:
            lo = mid
        else:
            hi = mid
    if len(best) > m:
        best = best[:m]
    elif len(best) < m:
        best = _farthest_fill(pts, best, m)
    return best


def select_nystrom_centers(cloud: OrientedPointCloud, target: Count | Radius, rng=None) -> np.ndarray:
    return cloud.points[select_nystrom_indices(cloud, target, rng)]


# ---------------------------------------------------------------------------
# Gram system
# ---------------------------------------------------------------------------


@dataclass
class GramSystem:
    """``kernel_matrix`` excludes the ridge; ``matrix`` adds ``lam * I`` in the square case."""

    kernel_matrix: np.ndarray
    rhs: np.ndarray
    centers: np.ndarray
    samples: np.ndarray
    kernel: Kernel
    lam: float = 0.0
    use_gradients: bool = True

    @property
    def square(self) -> bool:
        return self.centers.shape == self.samples.shape and np.array_equal(self.centers, self.samples)

    @property
    def block_size(self) -> int:
        return self.samples.shape[1] + 1 if self.use_gradients else 1

    @property
    def matrix(self) -> np.ndarray:
        if self.square and self.lam:
            return self.kernel_matrix + self.lam * np.eye(self.kernel_matrix.shape[0])
        return self.kernel_matrix


def gram_matrix(kernel: Kernel, X, Y, use_gradients=True, chunk=512) -> np.ndarray:
    """Dense block Gram matrix with rows grouped per point of ``X``."""
    X, Y = np.atleast_2d(X), np.atleast_2d(Y)
    D = X.shape[1] + 1 if use_gradients else 1
    out = np.empty((X.shape[0] * D, Y.shape[0] * D))
    for start in range(0, X.shape[0], chunk):
        xs = X[start:start + chunk]
        B = kernel.blocks(xs, Y)
        if not use_gradients:
            B = B[..., :1, :1]
        out[start * D:(start + len(xs)) * D] = B.transpose(0, 2, 1, 3).reshape(len(xs) * D, -1)
    return out


def assemble_gram(cloud: OrientedPointCloud, centers, kernel: Kernel, lam: float = 0.0,
                  use_gradients: bool = True) -> GramSystem:
    centers = np.atleast_2d(np.asarray(centers, dtype=float))
    if centers.shape[0] < 1:
        raise ValueError("need at least one center")
    if centers.shape[1] != cloud.dim:
        raise ValueError("center dimension does not match the cloud")
    K = gram_matrix(kernel, cloud.points, centers, use_gradients)
    if use_gradients:
        rhs = np.column_stack([cloud.values, cloud.normals]).ravel()
    else:
        rhs = cloud.values.copy()
    return GramSystem(K, rhs, centers, cloud.points, kernel, float(lam), use_gradients)


# ---------------------------------------------------------------------------
# Implicit field
# ---------------------------------------------------------------------------


@dataclass
class ImplicitField:
    """``f(x) = sum_i K(x, c_i) alpha_i``; first block row gives f, the rest its gradient."""

    centers: np.ndarray
    coefficients: np.ndarray  # (M, d+1), or (M, 1) for value-only fits
    kernel: Kernel
    transform: NormalizationTransform = None
    info: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(self.centers) != len(self.coefficients):
            raise ValueError("coefficient count must equal center count")
        if not np.all(np.isfinite(self.coefficients)):
            raise ValueError("non-finite coefficients")
        if self.transform is None:
            self.transform = NormalizationTransform.identity(self.centers.shape[1])

    @property
    def dim(self) -> int:
        return self.centers.shape[1]

    @property
    def use_gradients(self) -> bool:
        return self.coefficients.shape[1] > 1

    def __call__(self, X, chunk=4096) -> np.ndarray:
        """Field values only at points ``X (n, d)``."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        out = np.empty(len(X))
        a = self.coefficients
        for start in range(0, len(X), chunk):
            xs = X[start:start + chunk]
            if self.use_gradients:
                out[start:start + len(xs)] = self.kernel.field_values(xs, self.centers, a)
            else:
                out[start:start + len(xs)] = self.kernel.scalar(xs, self.centers) @ a[:, 0]
        return out

    def evaluate_batch(self, X, chunk=1024):
        """Values ``(n,)`` and gradients ``(n, d)``."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        d = X.shape[1]
        f = np.empty(len(X))
        g = np.empty((len(X), d))
        a = self.coefficients
        for start in range(0, len(X), chunk):
            xs = X[start:start + chunk]
            B = self.kernel.blocks(xs, self.centers)
            if not self.use_gradients:
                B = B[..., :, :1]
            r = np.einsum("nmpk,mk->np", B, a)
            f[start:start + len(xs)] = r[:, 0]
            g[start:start + len(xs)] = r[:, 1:]
        return f, g


def evaluate(field: ImplicitField, x):
    """``(f(x), grad f(x))`` at a single point."""
    f, g = field.evaluate_batch(np.asarray(x, dtype=float)[None, :])
    return float(f[0]), g[0]


# ---------------------------------------------------------------------------
# Solve
# ---------------------------------------------------------------------------


def _cg(matvec, b, tol, max_iter):
    n = len(b)
    op = scipy.sparse.linalg.LinearOperator((n, n), matvec=matvec, dtype=float)
    x, info = scipy.sparse.linalg.cg(op, b, rtol=tol, atol=0.0, maxiter=max_iter)
    res = float(np.linalg.norm(matvec(x) - b))
    if info != 0:
        raise SolverError(f"conjugate gradient did not converge in {max_iter} iterations", res)
    return x


def _psd_root(Kmm):
    """``R`` with ``R.T @ R == Kmm`` (negative round-off eigenvalues dropped)."""
    w, V = np.linalg.eigh(0.5 * (Kmm + Kmm.T))
    return np.sqrt(np.clip(w, 0.0, None))[:, None] * V.T


def solve(system: GramSystem, config: SolverConfig | None = None) -> ImplicitField:
    """Solve for per-center coefficients.

    Square systems solve ``(K + lam I) alpha = delta``. Rectangular (Nystrom)
    systems minimize ``|K_nm alpha - delta|^2 + lam alpha^T K_mm alpha``,
    i.e. the normal equations ``(K_nm^T K_nm + lam K_mm) alpha = K_nm^T delta``.
    The direct path solves them as a stacked least-squares problem, which
    avoids squaring the condition number.
    """
    config = config or SolverConfig(lam=system.lam)
    lam = config.lam
    K, b = system.kernel_matrix, system.rhs
    method = config.method
    if method == "auto":
        method = "direct" if K.shape[0] <= DIRECT_MAX_ROWS else "cg"

    if system.square:
        A = K + lam * np.eye(K.shape[0]) if lam else K
        if method == "direct":
            try:
                alpha = scipy.linalg.solve(A, b, assume_a="sym")
            except (np.linalg.LinAlgError, ValueError) as exc:
                raise SolverError(f"factorization failed: {exc}") from exc
        else:
            alpha = _cg(lambda v: A @ v, b, config.tol, config.max_iter)
    else:
        M = len(system.centers)
        need_kmm = lam > 0 or method != "direct"
        Kmm = gram_matrix(system.kernel, system.centers, system.centers, system.use_gradients) if need_kmm else None
        if method == "direct":
            # least squares on the stacked system never forms K^T K, so no ridge floor is needed
            lam_eff = lam
            if lam > 0:
                R = _psd_root(Kmm)
                A = np.vstack([K, np.sqrt(lam) * R])
                rhs = np.concatenate([b, np.zeros(R.shape[0])])
            else:
                A, rhs = K, b
            alpha = scipy.linalg.lstsq(A, rhs, lapack_driver="gelsd")[0]
        else:
            lam_eff = lam if lam > 0 else NYSTROM_RIDGE_FLOOR * np.trace(Kmm) / M
            N = K.T @ K + lam_eff * Kmm
            alpha = _cg(lambda v: N @ v, K.T @ b, config.tol, config.max_iter)
        lam = lam_eff

    residual = float(np.linalg.norm(K @ alpha - b))
    if not np.all(np.isfinite(alpha)):
        raise SolverError("non-finite solution", residual)
    D = system.block_size
    info = {"method": method, "lam": float(lam), "residual_norm": residual,
            "value_residual": float(np.max(np.abs((K @ alpha - b).reshape(-1, D)[:, 0]))) if len(b) else 0.0}
    return ImplicitField(system.centers, alpha.reshape(-1, D), system.kernel, info=info)


def data_residual(field: ImplicitField, system: GramSystem) -> float:
    """Sum of squared value and gradient residuals at the samples."""
    r = system.kernel_matrix @ field.coefficients.ravel() - system.rhs
    return float(r @ r)


def rkhs_norm(field: ImplicitField, system: GramSystem) -> float:
    """``sqrt(alpha^T K alpha)`` with the unregularized square Gram matrix."""
    if not system.square:
        raise ValueError("RKHS norm needs the square system (centers == samples)")
    a = field.coefficients.ravel()
    K = system.kernel_matrix
    q = float(a @ K @ a)
    if q < -1e-8 * np.linalg.norm(K):
        raise ValueError(f"negative quadratic form {q:.3e}: kernel matrix is not PSD")
    return float(np.sqrt(max(q, 0.0)))
