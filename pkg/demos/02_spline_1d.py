"""In one dimension the uniform-network kernel interpolates with a C2 cubic spline.

Run: python demos/02_spline_1d.py
"""
# %% Fit six values with the 1D kernel, no derivative constraints
import numpy as np

from kernelsurf.core import OrientedPointCloud
from kernelsurf.kernels import Spline1DKernel
from kernelsurf.solver import assemble_gram, solve

knots = np.array([-0.8, -0.45, -0.1, 0.2, 0.5, 0.85])
values = np.sin(3 * knots)
cloud = OrientedPointCloud(knots[:, None], np.ones((6, 1)), values)
field = solve(assemble_gram(cloud, cloud.points, Spline1DKernel(1.0), use_gradients=False))


def f(t):
    return field(np.atleast_1d(t)[:, None])


print("residual at the knots:", np.abs(f(knots) - values).max())

# %% Third derivative is constant between knots and jumps at them
h = 1e-2
edges = np.concatenate([[-1.0], knots, [1.0]])
for a, b in zip(edges[:-1], edges[1:]):
    t = np.linspace(a + 2 * h, b - 2 * h, 5)
    d3 = (f(t + 1.5 * h) - 3 * f(t + 0.5 * h) + 3 * f(t - 0.5 * h) - f(t - 1.5 * h)) / h**3
    print(f"[{a:+.2f}, {b:+.2f}]  f''' = {d3.mean():+9.4f}  (spread {np.ptp(d3):.1e})")
