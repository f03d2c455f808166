"""Closed-form kernels versus wide random ReLU layers.

Run: python demos/01_kernels.py
"""
# %% The two closed-form kernels and their derivative blocks
import numpy as np

from kernelsurf.core import make_rng
from kernelsurf.kernels import EmpiricalKernel, GaussianKernel, UniformKernel, sample_weights

x = np.array([0.3, -0.1, 0.4])
y = np.array([-0.2, 0.5, 0.1])
for kernel in (GaussianKernel(), UniformKernel(1.0)):
    B = kernel.blocks(x, y)[0, 0]
    print(f"{kernel!r}: K(x, y) = {B[0, 0]:.6f}")
    print("  gradient in y:", np.round(B[0, 1:], 6))

# %% A finite network approaches the kernel as the layer widens
rng = make_rng(7)
for name, kernel in (("gaussian", GaussianKernel()), ("uniform", UniformKernel(1.0))):
    exact = kernel.blocks(x, y)[0, 0]
    for m in (100, 1_000, 10_000, 100_000):
        emp = EmpiricalKernel(sample_weights(name, m, 3, 1.0, rng)).blocks(x, y)[0, 0]
        print(f"{name:>8} m={m:>7}: max block error {np.abs(emp - exact).max():.2e}")

# %% Finite-difference check of the mixed Hessian block
h = 1e-4
k = lambda a, b: float(GaussianKernel().scalar(a, b)[0, 0])  # noqa: E731
E = np.eye(3) * h
H = np.array([[k(x + a, y + b) - k(x + a, y - b) - k(x - a, y + b) + k(x - a, y - b) for b in E] for a in E])
H /= 4 * h * h
print("mixed Hessian, max |analytic - differences|:", np.abs(H - GaussianKernel().blocks(x, y)[0, 0, 1:, 1:]).max())
