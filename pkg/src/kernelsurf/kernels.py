"""Kernels of infinitely wide (and finite) shallow ReLU networks.

Every kernel here maps a pair of points ``x, y`` to a ``(d+1, d+1)`` block

    [[ k00,  k0g ],
     [ kg0,  kgg ]]

with ``k00 = E[phi(x) phi(y)]``, ``k0g = E[phi(x) grad phi(y)]`` (derivative
in the second argument), ``kg0 = E[grad phi(x) phi(y)]`` and
``kgg = E[grad phi(x) grad phi(y)^T]``, where ``phi(x) = [a.x + b]_+``.

Batched evaluation works on point arrays ``X (n, d)`` and ``Y (m, d)`` and
returns blocks of shape ``(n, m, d+1, d+1)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

# sin of the lifted angle is clamped to this before dividing by it
GAUSSIAN_SIN_FLOOR = 1e-7
# angles closer than this to 0 or pi are nudged before computing tau
UNIFORM_ANGLE_FLOOR = 1e-9


@dataclass(frozen=True)
class KernelBlock:
    k00: float
    k0g: np.ndarray
    kg0: np.ndarray
    kgg: np.ndarray

    @classmethod
    def from_matrix(cls, block) -> KernelBlock:
        block = np.asarray(block, dtype=float)
        return cls(float(block[0, 0]), block[0, 1:].copy(), block[1:, 0].copy(), block[1:, 1:].copy())

    def as_matrix(self) -> np.ndarray:
        d = len(self.k0g)
        out = np.empty((d + 1, d + 1))
        out[0, 0] = self.k00
        out[0, 1:] = self.k0g
        out[1:, 0] = self.kg0
        out[1:, 1:] = self.kgg
        return out


def _as_batch(X):
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[None, :]
    if not np.all(np.isfinite(X)):
        raise ValueError("non-finite kernel input")
    return X


class Kernel:
    """Base class: subclasses implement :meth:`blocks`."""

    #: points must satisfy ``norm(x) < support_radius``; ``None`` means unbounded
    support_radius: float | None = None

    def blocks(self, X, Y) -> np.ndarray:
        raise NotImplementedError

    def value_rows(self, X, Y) -> np.ndarray:
        """First block row ``[k00, k0g]`` only, shape ``(n, m, d+1)``."""
        return self.blocks(X, Y)[..., 0, :]

    def field_values(self, X, C, coef) -> np.ndarray:
        """``sum_j [k00, k0g](x_i, c_j) . coef_j`` for coefficients ``coef (m, d+1)``."""
        return np.einsum("nmk,mk->n", self.value_rows(X, C), coef)

    def block(self, x, y) -> KernelBlock:
        return KernelBlock.from_matrix(self.blocks(x, y)[0, 0])

    def scalar(self, X, Y) -> np.ndarray:
        return self.value_rows(X, Y)[..., 0]


# ---------------------------------------------------------------------------
# Gaussian weights: (a, b) ~ N(0, I)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LiftedPair:
    """Lifted points ``(x, 1)``, ``(y, 1)`` and the angle between them."""

    x_lift: np.ndarray
    y_lift: np.ndarray
    angle: float

    @classmethod
    def of(cls, x, y) -> LiftedPair:
        xl = np.append(np.asarray(x, dtype=float), 1.0)
        yl = np.append(np.asarray(y, dtype=float), 1.0)
        c = np.dot(xl, yl) / (np.linalg.norm(xl) * np.linalg.norm(yl))
        return cls(xl, yl, float(np.arccos(np.clip(c, -1.0, 1.0))))


def _lift(X):
    return np.concatenate([X, np.ones((X.shape[0], 1))], axis=1)


class GaussianKernel(Kernel):
    """Closed-form kernel for standard normal directions and biases.

    The scalar part is the first-order arc-cosine kernel of the lifted points
    ``u = (x, 1)``, ``v = (y, 1)``. The derivative blocks are its gradients and
    mixed Hessian in lifted space, restricted to the spatial coordinates.
    """

    def __repr__(self):
        return "GaussianKernel()"

    def _geometry(self, X, Y):
        U, V = _lift(_as_batch(X)), _lift(_as_batch(Y))
        nu = np.linalg.norm(U, axis=1)
        nv = np.linalg.norm(V, axis=1)
        uh = U / nu[:, None]
        vh = V / nv[:, None]
        cos = np.clip(uh @ vh.T, -1.0, 1.0)
        # p = v^ - cos u^ has norm sin(theta); computing sin from it keeps
        # accuracy for nearly parallel pairs where arccos is ill conditioned.
        p = vh[None, :, :] - cos[..., None] * uh[:, None, :]
        sin = np.linalg.norm(p, axis=-1)
        theta = np.arctan2(sin, cos)
        return U, V, nu, nv, uh, vh, cos, sin, theta, p

    def value_rows(self, X, Y):
        U, V, nu, nv, uh, vh, cos, sin, theta, _ = self._geometry(X, Y)
        d = U.shape[1] - 1
        J = sin + (np.pi - theta) * cos
        out = np.empty(cos.shape + (d + 1,))
        out[..., 0] = nu[:, None] * nv[None, :] * J
        # grad_v = |u| J v^ + (pi - theta) (u - (u.v^) v^)
        proj = U[:, None, :] - (nu[:, None] * cos)[..., None] * vh[None, :, :]
        gv = (nu[:, None] * J)[..., None] * vh[None, :, :] + (np.pi - theta)[..., None] * proj
        out[..., 1:] = gv[..., :d]
        return out / (2.0 * np.pi)

    def field_values(self, X, C, coef):
        U, V = _lift(_as_batch(X)), _lift(_as_batch(C))
        d = U.shape[1] - 1
        nu = np.linalg.norm(U, axis=1)[:, None]
        nv = np.linalg.norm(V, axis=1)
        cos = np.clip((U @ V.T) / (nu * nv[None, :]), -1.0, 1.0)
        # J is flat in theta near 0 and pi, so arccos accuracy suffices here
        theta = np.arccos(cos)
        sin = np.sqrt(1.0 - cos * cos)
        J = sin + (np.pi - theta) * cos
        ag = coef[:, 1:]
        vh_ag = np.einsum("md,md->m", V[:, :d], ag) / nv
        x_ag = U[:, :d] @ ag.T
        out = (nu * nv[None, :] * J) @ coef[:, 0]
        out += np.sum(nu * J * vh_ag + (np.pi - theta) * (x_ag - nu * cos * vh_ag), axis=1)
        return out / (2.0 * np.pi)

    def blocks(self, X, Y):
        U, V, nu, nv, uh, vh, cos, sin, theta, p = self._geometry(X, Y)
        d = U.shape[1] - 1
        J = sin + (np.pi - theta) * cos
        pi_t = np.pi - theta
        out = np.empty(cos.shape + (d + 1, d + 1))
        out[..., 0, 0] = nu[:, None] * nv[None, :] * J
        proj_u = U[:, None, :] - (nu[:, None] * cos)[..., None] * vh[None, :, :]
        gv = (nu[:, None] * J)[..., None] * vh[None, :, :] + pi_t[..., None] * proj_u
        proj_v = V[None, :, :] - (nv[None, :] * cos)[..., None] * uh[:, None, :]
        gu = (nv[None, :] * J)[..., None] * uh[:, None, :] + pi_t[..., None] * proj_v
        out[..., 0, 1:] = gv[..., :d]
        out[..., 1:, 0] = gu[..., :d]
        # mixed Hessian: (pi - theta) I + sin u^ v^T + p q^T / sin
        q = uh[:, None, :] - cos[..., None] * vh[None, :, :]
        us, vs = uh[:, None, :d], vh[None, :, :d]
        hess = sin[..., None, None] * (us[..., :, None] * vs[..., None, :])
        hess = hess + (p[..., :d, None] * q[..., None, :d]) / np.maximum(sin, GAUSSIAN_SIN_FLOOR)[..., None, None]
        hess = hess + pi_t[..., None, None] * np.eye(d)
        out[..., 1:, 1:] = hess
        return out / (2.0 * np.pi)


def gaussian_kernel_block(x, y) -> KernelBlock:
    return GaussianKernel().block(x, y)


# ---------------------------------------------------------------------------
# Uniform weights: a ~ U(S^{d-1}), b ~ U[-k, k]
# ---------------------------------------------------------------------------


def double_factorial(n: int) -> int:
    if n <= 0:
        return 1
    return math.prod(range(n, 0, -2))


def eta(d: int, r: int) -> float:
    """Angular constant of the hyperspherical reduction for degree ``r``."""
    lo, hi = (d - 2) // 2, -((-(d - 2)) // 2)
    if r % 2 == 0:
        return 2.0**hi * np.pi**lo
    return 2.0**lo * np.pi**hi


def sphere_volume(d: int) -> float:
    """Surface measure of the unit sphere ``S^{d-1}`` in ``R^d``."""
    return 2.0 * np.pi ** (d / 2) / math.gamma(d / 2)


def plane_weight(d: int, p: int) -> float:
    """Normalized weight of a degree-``p`` angular integral over ``S^{d-1}``.

    For ``g`` homogeneous of degree ``p`` in the projection of ``a`` onto a
    2-plane, ``E_a[g] = plane_weight(d, p) * int_0^{2 pi} g(cos psi, sin psi) dpsi``.
    """
    return eta(d, p) * double_factorial(p) / (double_factorial(d + p - 2) * sphere_volume(d))


@dataclass(frozen=True)
class UniformKernelIntermediates:
    """Angle, boundary angle, rotation and the closed-form angular integrals for one pair."""

    angle: float
    tau: float
    Q: np.ndarray
    eta: dict
    E1: float
    E2: float
    G1: float
    G2: float
    alpha: float
    beta: float
    gamma: float
    delta: float


def _frame(X, Y):
    """Unit vectors ``xh`` along x and ``eh`` spanning the (x, y) plane.

    Shapes ``(n, m, d)``. Degenerate inputs fall back to coordinate axes so the
    result is deterministic.
    """
    n, m, d = X.shape[0], Y.shape[0], X.shape[1]
    nx = np.linalg.norm(X, axis=1)
    ny = np.linalg.norm(Y, axis=1)
    xh = np.zeros((n, m, d))
    good_x = nx > 1e-300
    xh[good_x] = (X[good_x] / nx[good_x, None])[:, None, :]
    if not np.all(good_x):
        # x = 0: any direction works; use y's if available, else the last axis
        yh = np.zeros((m, d))
        good_y = ny > 1e-300
        yh[good_y] = Y[good_y] / ny[good_y, None]
        yh[~good_y, -1] = 1.0
        xh[~good_x] = yh[None, :, :]
    rej = Y[None, :, :] - np.einsum("nmd,md->nm", xh, Y)[..., None] * xh
    rn = np.linalg.norm(rej, axis=-1)
    eh = np.empty_like(xh)
    ok = rn > 1e-12 * np.maximum(ny[None, :], 1e-300)
    eh[ok] = rej[ok] / rn[ok][:, None]
    bad = ~ok
    if np.any(bad):
        xb = xh[bad]
        axis = np.argmin(np.abs(xb), axis=1)
        e = np.zeros_like(xb)
        e[np.arange(len(xb)), axis] = 1.0
        e -= np.sum(e * xb, axis=1)[:, None] * xb
        eh[bad] = e / np.linalg.norm(e, axis=1)[:, None]
    return nx, ny, xh, eh


def _rotation(xh, eh):
    """Rotation with ``Q xh = e_{d-1}`` and ``Q eh = e_d`` (reflection only in d=2)."""
    d = len(xh)
    basis = [xh, eh]
    for i in range(d):
        if len(basis) == d:
            break
        v = np.zeros(d)
        v[i] = 1.0
        for b in basis:
            v -= np.dot(v, b) * b
        nv = np.linalg.norm(v)
        if nv > 1e-6:
            basis.append(v / nv)
    rows = basis[2:] + [xh, eh]
    Q = np.array(rows)
    if d > 2 and np.linalg.det(Q) < 0:
        Q[0] = -Q[0]
    return Q


def _uniform_terms(nx, ny, ca, sa, second_order=True):
    """Closed-form angular integrals for arrays of pair geometry.

    ``ca, sa`` are the cosine and sine of the angle between x and y. The plane
    is split at ``tau`` into ``(tau, tau + pi)``, where the x-projection is the
    smaller one, and its complement. Every antiderivative below is odd in
    ``(sin psi, cos psi)``, so each bracket over a half-turn collapses to
    ``-2 f(tau)`` or ``2 f(tau)`` and no trigonometric calls are needed.
    """
    A = nx - ny * ca
    B = ny * sa
    R = np.hypot(A, B)
    safe = np.where(R > 0, R, 1.0)
    s = np.where(R > 0, A / safe, 0.0)
    c = np.where(R > 0, B / safe, 1.0)
    tau = np.arctan2(A, B)

    c2a, s2a = ca * ca - sa * sa, 2 * sa * ca
    s3, c3 = 3 * s - 4 * s**3, 4 * c**3 - 3 * c
    sin_pa, cos_pa = s * ca + c * sa, c * ca - s * sa          # psi + a
    sin_ma, cos_ma = s * ca - c * sa, c * ca + s * sa          # psi - a
    sin_m2a, cos_m2a = s * c2a - c * s2a, c * c2a + s * s2a    # psi - 2a
    sin_3ma, cos_3ma = s3 * ca - c3 * sa, c3 * ca + s3 * sa    # 3 psi - a
    sin_3m2a, cos_3m2a = s3 * c2a - c3 * s2a, c3 * c2a + s3 * s2a

    # arc where the x-projection is smaller: bracket = -2 f(tau)
    # complementary arc: bracket = 2 f(tau)
    e1 = (s**3 - 3 * s) * nx**3 / 18 + nx**2 * ny * (3 * sin_pa + sin_3ma + 6 * sin_ma) / 24
    e2 = (sin_ma**3 - 3 * sin_ma) * ny**3 / 18 + nx * ny**2 * (sin_3m2a + 3 * sin_m2a + 6 * s) / 24
    E1, E2 = -2 * e1, 2 * e2

    g1_s = nx**2 / 2 * (s - s**3 / 3)
    g1_t = nx * ny * (sin_ma / 2 + sin_3ma / 12 + sin_pa / 4) - ny**2 / 2 * (s / 2 + sin_3m2a / 12 + sin_m2a / 4)
    g2_s = -nx**2 * c**3 / 6
    g2_t = nx * ny * (-cos_3ma / 12 - cos_pa / 4) - ny**2 / 2 * (-c / 2 - cos_3m2a / 12 + cos_m2a / 4)
    G1 = 2 * (g1_t - g1_s)
    G2 = 2 * (g2_t - g2_s)
    if not second_order:
        return tau, E1, E2, G1, G2

    al = 2 * (ny * (sin_pa / 4 + sin_3ma / 12 + sin_ma / 2) - nx * (s - s**3 / 3))
    be = 2 * (ny * (-cos_pa / 4 - cos_3ma / 12) + nx * c**3 / 3)
    ga = 2 * (ny * (-sin_pa / 4 - sin_3ma / 12 + sin_ma / 2) - nx * s**3 / 3)
    de = 2 * (ny * sin_ma - nx * s)
    return tau, E1, E2, G1, G2, al, be, ga, de


def _clamped_angle(along, across):
    """Angle between x and y (with its cosine and sine) from plane coordinates, kept off 0 and pi."""
    r = np.hypot(along, across)
    safe = np.where(r > 0, r, 1.0)
    ca = np.where(r > 0, along / safe, 1.0)
    sa = np.where(r > 0, across / safe, 0.0)
    angle = np.arctan2(sa, ca)
    low = sa < math.sin(UNIFORM_ANGLE_FLOOR)
    if np.any(low):
        angle = np.clip(angle, UNIFORM_ANGLE_FLOOR, np.pi - UNIFORM_ANGLE_FLOOR)
        ca = np.where(low, np.cos(angle), ca)
        sa = np.where(low, np.sin(angle), sa)
    return angle, ca, sa


def _pair_angle(X, Y, xh, eh):
    along = np.einsum("nmd,md->nm", xh, Y)
    # eh is built so that this is >= 0; drop the sign of rounding noise (-0.0 would flip atan2 to -pi)
    across = np.abs(np.einsum("nmd,md->nm", eh, Y))
    return _clamped_angle(along, across)


class UniformKernel(Kernel):
    """Closed-form kernel for directions uniform on the sphere, biases uniform on ``[-k, k]``.

    Valid for ``norm(x), norm(y) < k`` and ``d >= 2``.
    """

    def __init__(self, k: float = 1.0):
        if not k > 0:
            raise ValueError("k must be positive")
        self.k = float(k)
        self.support_radius = self.k

    def __repr__(self):
        return f"UniformKernel(k={self.k})"

    def _check(self, X, Y):
        X, Y = _as_batch(X), _as_batch(Y)
        if X.shape[1] < 2:
            raise ValueError("uniform kernel needs d >= 2; use spline1d_kernel in 1D")
        if np.any(np.linalg.norm(X, axis=1) >= self.k) or np.any(np.linalg.norm(Y, axis=1) >= self.k):
            raise ValueError("outside kernel support bound")
        return X, Y

    def intermediates(self, x, y) -> UniformKernelIntermediates:
        X, Y = self._check(x, y)
        d = X.shape[1]
        nx, ny, xh, eh = _frame(X, Y)
        angle, ca, sa = _pair_angle(X, Y, xh, eh)
        terms = _uniform_terms(nx[:, None], ny[None, :], ca, sa)
        Q = _rotation(xh[0, 0], eh[0, 0])
        etas = {r: eta(d, r) for r in range(4)}
        return UniformKernelIntermediates(float(angle[0, 0]), *(float(t[0, 0]) for t in terms[:1]), Q, etas,
                                          *(float(t[0, 0]) for t in terms[1:]))

    def _parts(self, X, Y):
        X, Y = self._check(X, Y)
        d = X.shape[1]
        nx, ny, xh, eh = _frame(X, Y)
        _, ca, sa = _pair_angle(X, Y, xh, eh)
        terms = _uniform_terms(nx[:, None], ny[None, :], ca, sa)
        return X, Y, d, xh, eh, terms

    def value_rows(self, X, Y):
        X, Y, d, xh, eh, (tau, E1, E2, G1, G2, *_rest) = self._parts(X, Y)
        k = self.k
        w3 = plane_weight(d, 3)
        out = np.empty(tau.shape + (d + 1,))
        out[..., 0] = k**3 / 3 + k * (X @ Y.T) / d + w3 * (E1 + E2)
        out[..., 1:] = k * X[:, None, :] / d + w3 * (G1[..., None] * xh + G2[..., None] * eh)
        return out / (2 * k)

    def field_values(self, X, C, coef):
        X, C = self._check(X, C)
        d = X.shape[1]
        k = self.k
        w3 = plane_weight(d, 3)
        nx = np.linalg.norm(X, axis=1)
        ny = np.linalg.norm(C, axis=1)
        xh = np.where(nx[:, None] > 1e-300, X / np.where(nx > 1e-300, nx, 1.0)[:, None], 0.0)
        ag = coef[:, 1:]
        xy = X @ C.T
        x_ag = X @ ag.T
        y_ag = np.einsum("md,md->m", C, ag)
        origin = nx <= 1e-300
        along = xh @ C.T
        xh_ag = xh @ ag.T
        if np.any(origin):
            # x = 0: align the frame with y, as in the block path
            yh = np.where(ny[:, None] > 1e-300, C / np.where(ny > 1e-300, ny, 1.0)[:, None], 0.0)
            along[origin] = ny[None, :]
            xh_ag[origin] = np.einsum("md,md->m", yh, ag)[None, :]
        across = np.sqrt(np.maximum(ny[None, :] ** 2 - along**2, 0.0))
        ok = across > 1e-12 * np.maximum(ny[None, :], 1e-300)
        # collinear pairs: G2 vanishes with the clamped angle, the in-plane direction is irrelevant
        eh_ag = np.where(ok, (y_ag[None, :] - along * xh_ag) / np.where(ok, across, 1.0), 0.0)
        _, ca, sa = _clamped_angle(along, across)
        _, E1, E2, G1, G2 = _uniform_terms(nx[:, None], ny[None, :], ca, sa, second_order=False)
        vals = (k**3 / 3 + k * xy / d + w3 * (E1 + E2)) @ coef[:, 0]
        vals += np.sum(k * x_ag / d + w3 * (G1 * xh_ag + G2 * eh_ag), axis=1)
        return vals / (2 * k)

    def blocks(self, X, Y):
        X, Y = self._check(X, Y)
        d = X.shape[1]
        k = self.k
        w3 = plane_weight(d, 3)
        out = np.empty((X.shape[0], Y.shape[0], d + 1, d + 1))
        out[..., 0, :] = self.value_rows(X, Y)
        out[..., 1:, 0] = np.swapaxes(self.value_rows(Y, X)[..., 1:], 0, 1)
        nx, ny, xh, eh = _frame(X, Y)
        _, ca, sa = _pair_angle(X, Y, xh, eh)
        _, _, _, _, _, al, be, ga, de = _uniform_terms(nx[:, None], ny[None, :], ca, sa)
        outer = lambda u, v: u[..., :, None] * v[..., None, :]  # noqa: E731
        plane = (al[..., None, None] * outer(xh, xh) + be[..., None, None] * (outer(xh, eh) + outer(eh, xh))
                 + ga[..., None, None] * outer(eh, eh))
        perp = np.eye(d) - outer(xh, xh) - outer(eh, eh)
        gg = k * np.eye(d) / d + w3 * (plane + (de / 3)[..., None, None] * perp)
        out[..., 1:, 1:] = gg / (2 * k)
        return out


def uniform_kernel_block(x, y, k: float = 1.0) -> KernelBlock:
    return UniformKernel(k).block(x, y)


# ---------------------------------------------------------------------------
# 1D cubic spline kernel
# ---------------------------------------------------------------------------


def _spline_ordered(x, y, k):
    # assumes x <= y
    return (3 * y - x + 2 * k) * (x + k) ** 2 / 12 - (3 * x - y - 2 * k) * (y - k) ** 2 / 12


def spline1d_kernel(x, y, k: float = 1.0):
    """Scalar kernel of the 1D uniform network; a piecewise cubic in each argument."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if np.any(np.abs(x) > k) or np.any(np.abs(y) > k):
        raise ValueError(f"spline kernel inputs must lie in [-{k}, {k}]")
    lo, hi = np.minimum(x, y), np.maximum(x, y)
    out = _spline_ordered(lo, hi, k)
    return float(out) if out.ndim == 0 else out


class Spline1DKernel(Kernel):
    """Full ``2x2`` blocks of the 1D spline kernel (value and derivative)."""

    def __init__(self, k: float = 1.0):
        self.k = float(k)

    def __repr__(self):
        return f"Spline1DKernel(k={self.k})"

    def blocks(self, X, Y):
        X, Y = _as_batch(X), _as_batch(Y)
        if X.shape[1] != 1 or Y.shape[1] != 1:
            raise ValueError("spline kernel is one-dimensional")
        k = self.k
        x = X[:, 0][:, None]
        y = Y[:, 0][None, :]
        if np.any(np.abs(x) > k) or np.any(np.abs(y) > k):
            raise ValueError(f"spline kernel inputs must lie in [-{k}, {k}]")
        x, y = np.broadcast_arrays(x, y)
        lo, hi = np.minimum(x, y), np.maximum(x, y)
        # with lo <= hi: K = (3hi - lo + 2k)(lo + k)^2/12 - (3lo - hi - 2k)(hi - k)^2/12
        d_lo = (-(lo + k) ** 2 + 2 * (3 * hi - lo + 2 * k) * (lo + k)) / 12 - 3 * (hi - k) ** 2 / 12
        d_hi = 3 * (lo + k) ** 2 / 12 - (-(hi - k) ** 2 + 2 * (3 * lo - hi - 2 * k) * (hi - k)) / 12
        # mixed second derivative is symmetric in (lo, hi)
        d_lohi = (lo + k) / 2 - (hi - k) / 2
        x_is_lo = x <= y
        out = np.empty(x.shape + (2, 2))
        out[..., 0, 0] = _spline_ordered(lo, hi, k)
        out[..., 0, 1] = np.where(x_is_lo, d_hi, d_lo)
        out[..., 1, 0] = np.where(x_is_lo, d_lo, d_hi)
        out[..., 1, 1] = d_lohi
        return out


# ---------------------------------------------------------------------------
# Finite-width (empirical) kernel
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class WeightEnsemble:
    """Bottom-layer weights ``a (m, d)`` and ``b (m,)`` of a finite network."""

    a: np.ndarray
    b: np.ndarray
    distribution: str
    k: float | None = None

    def __post_init__(self):
        if self.a.ndim != 2 or self.a.shape[0] < 1 or self.b.shape != (self.a.shape[0],):
            raise ValueError("need a (m, d) and b (m,) with m >= 1")
        if self.distribution not in ("uniform", "gaussian"):
            raise ValueError(f"unknown distribution {self.distribution!r}")

    @property
    def m(self) -> int:
        return self.a.shape[0]


def sample_weights(distribution: str, m: int, d: int, k: float = 1.0, rng=None) -> WeightEnsemble:
    if m < 1:
        raise ValueError("m must be >= 1")
    if rng is None:
        from .core import make_rng
        rng = make_rng(0)
    if distribution == "uniform":
        a = rng.standard_normal((m, d))
        a /= np.linalg.norm(a, axis=1)[:, None]
        b = rng.uniform(-k, k, size=m)
        return WeightEnsemble(a, b, "uniform", float(k))
    if distribution == "gaussian":
        a = rng.standard_normal((m, d))
        b = rng.standard_normal(m)
        return WeightEnsemble(a, b, "gaussian")
    raise ValueError(f"unknown distribution {distribution!r}")


def neuron_features(X, w: WeightEnsemble):
    """ReLU features ``(n, m)`` and their gradients ``(n, m, d)`` for every neuron."""
    X = _as_batch(X)
    z = X @ w.a.T + w.b
    active = (z > 0).astype(float)
    return np.maximum(z, 0.0), active[..., None] * w.a[None, :, :]


class EmpiricalKernel(Kernel):
    """Average of per-neuron outer products over a fixed weight ensemble."""

    def __init__(self, weights: WeightEnsemble):
        self.weights = weights

    def __repr__(self):
        return f"EmpiricalKernel(m={self.weights.m}, {self.weights.distribution})"

    def per_neuron(self, x, y) -> np.ndarray:
        """Per-neuron blocks ``(m, d+1, d+1)`` for a single pair."""
        fx, gx = neuron_features(x, self.weights)
        fy, gy = neuron_features(y, self.weights)
        vx = np.concatenate([fx[0][:, None], gx[0]], axis=1)
        vy = np.concatenate([fy[0][:, None], gy[0]], axis=1)
        return vx[:, :, None] * vy[:, None, :]

    def blocks(self, X, Y):
        X, Y = _as_batch(X), _as_batch(Y)
        if X.shape[1] != self.weights.a.shape[1] or Y.shape[1] != self.weights.a.shape[1]:
            raise ValueError("dimension mismatch between points and weights")
        m = self.weights.m
        fx, _ = neuron_features(X, self.weights)
        fy, _ = neuron_features(Y, self.weights)
        ax = (X @ self.weights.a.T + self.weights.b > 0).astype(float)
        ay = (Y @ self.weights.a.T + self.weights.b > 0).astype(float)
        # lift each neuron's features into (value, gradient) vectors
        A = self.weights.a
        d = A.shape[1]
        out = np.empty((X.shape[0], Y.shape[0], d + 1, d + 1))
        out[..., 0, 0] = fx @ fy.T / m
        out[..., 0, 1:] = np.einsum("ik,jk,kp->ijp", fx, ay, A) / m
        out[..., 1:, 0] = np.einsum("ik,jk,kp->ijp", ax, fy, A) / m
        out[..., 1:, 1:] = np.einsum("ik,jk,kp,kq->ijpq", ax, ay, A, A, optimize=True) / m
        return out


def empirical_kernel_block(x, y, w: WeightEnsemble) -> KernelBlock:
    return EmpiricalKernel(w).block(x, y)


# ---------------------------------------------------------------------------
# Approximate Poisson-reconstruction kernel
# ---------------------------------------------------------------------------


def bspline_bump(t, degree: int):
    """Centred cardinal B-spline of degree 1 (hat) or 2, evaluated at ``t``."""
    t = np.abs(np.asarray(t, dtype=float))
    if degree == 1:
        return np.maximum(1.0 - t, 0.0)
    if degree == 2:
        return np.where(t < 0.5, 0.75 - t**2, np.where(t < 1.5, 0.5 * (1.5 - t) ** 2, 0.0))
    raise ValueError("spline degree must be 1 or 2")


def _bump_pieces(degree: int):
    """Polynomial pieces (in rho, rho >= 0) of the radial bump: list of (lo, hi, coeffs ascending)."""
    if degree == 1:
        return [(0.0, 1.0, np.array([1.0, -1.0]))]
    if degree == 2:
        return [(0.0, 0.5, np.array([0.75, 0.0, -1.0])), (0.5, 1.5, np.array([1.125, -1.5, 0.5]))]
    raise ValueError("spline degree must be 1 or 2")


def bump_support(degree: int) -> float:
    return _bump_pieces(degree)[-1][1]


def _simpson(f, lo, hi, n):
    if n % 2 == 0:
        n += 1
    xs = np.linspace(lo, hi, n)
    h = (hi - lo) / (n - 1)
    w = np.ones(n)
    w[1:-1:2] = 4
    w[2:-1:2] = 2
    return h / 3 * np.dot(w, f(xs))


def poisson_radial_kernel(r, spline_degree: int = 1, quadrature_points: int = 201) -> float:
    """Newton potential of the radial bump, evaluated at distance ``r``.

    The shell of radius ``rho`` contributes ``4 pi rho^2 B(rho) / max(r, rho)``.
    Composite Simpson is applied piecewise between the bump's knots and ``r``
    so every panel integrates a smooth polynomial-like integrand.
    """
    if quadrature_points < 3:
        raise ValueError("quadrature_points must be >= 3")
    r = float(r)
    if r < 0:
        raise ValueError("r must be non-negative")
    R = bump_support(spline_degree)
    knots = sorted({0.0, R, *[p[0] for p in _bump_pieces(spline_degree)]} | ({r} if 0 < r < R else set()))
    total = knots[-1] - knots[0]

    def integrand(rho):
        return 4 * np.pi * rho**2 * bspline_bump(rho, spline_degree) / np.maximum(np.maximum(r, rho), 1e-300)

    value = 0.0
    for lo, hi in zip(knots[:-1], knots[1:]):
        n = max(3, int(round(quadrature_points * (hi - lo) / total)))
        value += _simpson(integrand, lo, hi, n)
    return value


class PoissonRadialKernel(Kernel):
    """Translation-invariant kernel ``K(|x - y|)`` from the radial Poisson approximation.

    ``width`` rescales the bump support. Radial profile and its derivatives
    are evaluated from exact piecewise-polynomial antiderivatives.
    """

    def __init__(self, spline_degree: int = 1, width: float = 1.0):
        self.degree = spline_degree
        self.width = float(width)
        self._pieces = _bump_pieces(spline_degree)

    def __repr__(self):
        return f"PoissonRadialKernel(degree={self.degree}, width={self.width})"

    def _mass_and_tail(self, r):
        """``M(r) = int_0^r 4 pi rho^2 B`` and ``T(r) = int_r^R 4 pi rho B`` for unit width."""
        P = np.polynomial.polynomial
        mass = np.zeros_like(r)
        tail = np.zeros_like(r)
        for lo, hi, c in self._pieces:
            cm = P.polyint(P.polymulx(P.polymulx(c)))
            ct = P.polyint(P.polymulx(c))
            a = np.clip(r, lo, hi)
            mass += P.polyval(a, cm) - P.polyval(lo, cm)
            tail += P.polyval(hi, ct) - P.polyval(a, ct)
        return 4 * np.pi * mass, 4 * np.pi * tail

    def total_mass(self) -> float:
        """Integral of the scaled bump, so that ``K(r) = total_mass / r`` outside its support."""
        mass, _ = self._mass_and_tail(np.array([bump_support(self.degree)]))
        return float(self.width**3 * mass[0])

    def profile(self, r):
        """Radial profile ``K(r)`` and derivatives ``K'(r)``, ``K''(r)``."""
        h = self.width
        t = np.asarray(r, dtype=float) / h
        M, T = self._mass_and_tail(t)
        B = bspline_bump(t, self.degree)
        small = t < 1e-8
        ts = np.where(small, 1.0, t)
        K = np.where(small, T, M / ts + T)
        dK = np.where(small, 0.0, -M / ts**2)
        ddK = np.where(small, -4 * np.pi * B / 3, 2 * M / ts**3 - 4 * np.pi * B)
        # K(r) = h^2 * K1(r / h)
        return h**2 * K, h * dK, ddK

    def value_rows(self, X, Y):
        return self.blocks(X, Y)[..., 0, :]

    def blocks(self, X, Y):
        X, Y = _as_batch(X), _as_batch(Y)
        d = X.shape[1]
        diff = X[:, None, :] - Y[None, :, :]
        r = np.linalg.norm(diff, axis=-1)
        K, dK, ddK = self.profile(r)
        rs = np.where(r > 0, r, 1.0)
        zh = diff / rs[..., None]
        # K'(r)/r -> K''(0) as r -> 0
        dK_over_r = np.where(r > 1e-8 * self.width, dK / rs, ddK)
        grad_x = dK_over_r[..., None] * diff
        hess = (ddK - dK_over_r)[..., None, None] * (zh[..., :, None] * zh[..., None, :]) + dK_over_r[
            ..., None, None] * np.eye(d)
        out = np.empty(r.shape + (d + 1, d + 1))
        out[..., 0, 0] = K
        out[..., 0, 1:] = -grad_x
        out[..., 1:, 0] = grad_x
        out[..., 1:, 1:] = -hess
        return out


KERNELS = {
    "gaussian": GaussianKernel,
    "uniform": UniformKernel,
    "poisson-radial": PoissonRadialKernel,
}
