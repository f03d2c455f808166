"""Surface distances, volumetric IoU and the radial Poisson-style kernel.

Run: python demos/04_metrics_and_poisson.py
"""
# %% Chamfer and Hausdorff between two point samplings of spheres
import numpy as np

from kernelsurf.core import make_rng
from kernelsurf.kernels import PoissonRadialKernel, bump_support
from kernelsurf.metrics import chamfer, hausdorff, volumetric_iou

rng = make_rng(3)
u = rng.standard_normal((20_000, 3))
u /= np.linalg.norm(u, axis=1)[:, None]
v = rng.standard_normal((20_000, 3))
v /= np.linalg.norm(v, axis=1)[:, None]
print("radius 1 vs radius 0.9:  chamfer", round(chamfer(u, 0.9 * v), 4), " hausdorff", round(hausdorff(u, 0.9 * v), 4))

# %% Occupancy overlap of concentric balls, expected 0.8^3 = 0.512
iou = volumetric_iou(lambda q: np.linalg.norm(q, axis=1) < 0.8, lambda q: np.linalg.norm(q, axis=1) < 1.0,
                     ([-1.1] * 3, [1.1] * 3), resolution=128)
print(f"IoU of balls r=0.8 and r=1: {iou:.4f}")

# %% The radial kernel decays like mass / r outside the bump
ker = PoissonRadialKernel(spline_degree=2, width=0.25)
R = bump_support(2) * ker.width
for r in (0.0, 0.5 * R, R, 2 * R, 4 * R):
    val = ker.profile(np.array([r]))[0][0]
    print(f"r = {r:.3f}: K = {val:.5f}" + (f"   mass/r = {ker.total_mass() / r:.5f}" if r >= R else ""))
