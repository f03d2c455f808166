"""Quick invariant checks for the kernels and the solver, run by ``kernelsurf selftest``."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .core import OrientedPointCloud, make_rng
from .kernels import (EmpiricalKernel, GaussianKernel, Kernel, PoissonRadialKernel, Spline1DKernel,
                      UniformKernel, poisson_radial_kernel, sample_weights, spline1d_kernel)
from .solver import SolverConfig, assemble_gram, solve


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str


class _FaultyGaussian(GaussianKernel):
    """Gaussian kernel with one mixed-Hessian entry perturbed (fault injection)."""

    def blocks(self, X, Y):
        out = super().blocks(X, Y)
        out[..., 1, 2] += 1e-2
        return out


def fd_block_errors(kernel: Kernel, x, y, h: float = 1e-4):
    """Relative errors of the gradient and mixed-Hessian blocks against central differences.

    Each sub-block is compared against its own largest entry.
    """
    d = len(x)
    k = lambda a, b: float(kernel.scalar(a, b)[0, 0])  # noqa: E731
    B = kernel.blocks(x, y)[0, 0]
    E = np.eye(d) * h
    g_y = np.array([(k(x, y + E[j]) - k(x, y - E[j])) / (2 * h) for j in range(d)])
    g_x = np.array([(k(x + E[i], y) - k(x - E[i], y)) / (2 * h) for i in range(d)])
    H = np.array([[(k(x + E[i], y + E[j]) - k(x + E[i], y - E[j]) - k(x - E[i], y + E[j])
                    + k(x - E[i], y - E[j])) / (4 * h * h) for j in range(d)] for i in range(d)])

    def rel(fd, an):
        return float(np.max(np.abs(fd - an)) / max(np.max(np.abs(an)), 1e-12))

    return rel(g_y, B[0, 1:]), rel(g_x, B[1:, 0]), rel(H, B[1:, 1:])


def mc_zscores(kernel: Kernel, distribution: str, x, y, m: int, rng, k: float = 1.0) -> np.ndarray:
    """``(empirical - analytic) / standard error`` for every block entry.

    Entries with zero sample variance (the empirical value is exact) get z = 0
    when they agree and infinity otherwise.
    """
    w = sample_weights(distribution, m, len(x), k, rng)
    per = EmpiricalKernel(w).per_neuron(x, y)
    mean = per.mean(axis=0)
    se = per.std(axis=0, ddof=1) / math.sqrt(m)
    diff = mean - kernel.blocks(x, y)[0, 0]
    return np.where(se > 0, diff / np.where(se > 0, se, 1.0), np.where(np.abs(diff) < 1e-12, 0.0, np.inf))


def _random_pairs(rng, n, d, radius):
    pts = rng.standard_normal((2 * n, d))
    pts *= (radius * rng.random(2 * n) ** (1 / d) / np.linalg.norm(pts, axis=1))[:, None]
    return pts[:n], pts[n:]


def run_checks(seed: int = 0, inject_fault: bool = False) -> list[CheckResult]:
    rng = make_rng(seed)
    gauss = _FaultyGaussian() if inject_fault else GaussianKernel()
    unif = UniformKernel(1.0)
    results = []

    def check(name: str, fn: Callable[[], tuple[bool, str]]):
        try:
            ok, detail = fn()
        except Exception as exc:  # a crashing check is a failing check
            ok, detail = False, f"{type(exc).__name__}: {exc}"
        results.append(CheckResult(name, bool(ok), detail))

    X, Y = _random_pairs(rng, 10, 3, 0.8)

    def fd(kernel, which, tol):
        def run():
            worst = max(fd_block_errors(kernel, x, y)[which] for x, y in zip(X, Y))
            return worst < tol, f"max rel err {worst:.2e}"
        return run

    check("gaussian_fd_gradient", fd(gauss, 0, 1e-4))
    check("gaussian_fd_hessian", fd(gauss, 2, 1e-4))
    check("uniform_fd_gradient", fd(unif, 0, 1e-3))
    check("uniform_fd_hessian", fd(unif, 2, 1e-3))

    def symmetry(kernel):
        def run():
            A = kernel.blocks(X, Y)
            B = np.swapaxes(kernel.blocks(Y, X), 0, 1)
            err = float(np.max(np.abs(A - np.swapaxes(B, -1, -2))))
            return err < 1e-10, f"max asym {err:.2e}"
        return run

    check("gaussian_block_symmetry", symmetry(gauss))
    check("uniform_block_symmetry", symmetry(unif))

    P = _random_pairs(rng, 30, 3, 0.8)[0]

    def psd(kernel):
        def run():
            from .solver import gram_matrix
            K = gram_matrix(kernel, P, P)
            lo = float(np.linalg.eigvalsh(0.5 * (K + K.T)).min())
            tol = 1e-9 * float(np.abs(K).max())
            return lo > -tol, f"min eigenvalue {lo:.2e}"
        return run

    check("gaussian_gram_psd", psd(gauss))
    check("uniform_gram_psd", psd(unif))

    def mc(kernel, dist):
        def run():
            z = max(float(np.max(np.abs(mc_zscores(kernel, dist, x, y, 20000, rng)))) for x, y in zip(X[:4], Y[:4]))
            return z < 5.0, f"max |z| {z:.2f}"
        return run

    check("gaussian_monte_carlo", mc(gauss, "gaussian"))
    check("uniform_monte_carlo", mc(unif, "uniform"))

    def spline():
        # (1/2) sum over a = +-1 of the integral of relu(a x + b) relu(a y + b) over b in [-1, 1]
        xs = rng.uniform(-0.9, 0.9, 6)
        b = np.linspace(-1, 1, 20001)
        worst = 0.0
        for x, y in zip(xs[:3], xs[3:]):
            vals = sum(np.maximum(s * x + b, 0) * np.maximum(s * y + b, 0) for s in (1.0, -1.0))
            ref = 0.5 * np.trapezoid(vals, b)
            worst = max(worst, abs(spline1d_kernel(x, y) - ref))
        blocks_ok = abs(Spline1DKernel().blocks([[0.2]], [[0.5]])[0, 0, 0, 0] - spline1d_kernel(0.2, 0.5)) < 1e-14
        return worst < 1e-6 and blocks_ok, f"max abs err {worst:.2e}"

    check("spline1d_expectation", spline)

    def poisson_exterior():
        ker = PoissonRadialKernel(spline_degree=2)
        r = np.array([2.0, 3.0, 5.0])
        mass = ker.total_mass()
        err = float(np.max(np.abs(ker.profile(r)[0] - mass / r) / (mass / r)))
        quad = abs(poisson_radial_kernel(2.0, 2) - mass / 2.0) / (mass / 2.0)
        return max(err, quad) < 1e-6, f"max rel err {max(err, quad):.2e}"

    check("poisson_exterior_mass", poisson_exterior)

    def poisson_monotone():
        r = np.linspace(0, 3, 200)
        K = PoissonRadialKernel(spline_degree=2).profile(r)[0]
        worst = float(np.max(np.diff(K)))
        return worst <= 1e-12, f"max increase {worst:.2e}"

    check("poisson_monotone", poisson_monotone)

    def interpolation():
        pts, nrm = _random_pairs(rng, 40, 3, 0.6)
        cloud = OrientedPointCloud(pts, nrm)
        system = assemble_gram(cloud, cloud.points, gauss)
        field = solve(system, SolverConfig())
        f, g = field.evaluate_batch(cloud.points)
        ev, en = float(np.max(np.abs(f))), float(np.max(np.abs(g - cloud.normals)))
        return ev < 1e-6 and en < 1e-5, f"value err {ev:.2e}, normal err {en:.2e}"

    check("gaussian_interpolation", interpolation)
    return results


def format_results(results: list[CheckResult]) -> str:
    width = max(len(r.name) for r in results)
    return "\n".join(f"{'PASS' if r.passed else 'FAIL'}  {r.name:<{width}}  {r.detail}" for r in results)
