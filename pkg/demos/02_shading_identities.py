"""
Checking the shading identities
===============================

The second derivatives of a Lambertian image are tied to the surface
Hessian and its third derivatives.  Here we evaluate those identities on
a quadratic patch and on a Gaussian ridge, once with exact derivatives
and once with finite differences, and print the 95th percentile of the
relative residual for each.  A twist sweep then shows the ridge residual
growing as the light leaves the ridge plane.
"""

import numpy as np

from qualshape.shadingeq import random_lights, residual_sweep, sample_points, twist_sweep
from qualshape.surfacegen import quadratic, ridge

surfaces = {
    "quadratic": (quadratic([0, 0.1, -0.2, 0.5, 0.3, 0.8], domain=(-1, 1, -1, 1)), 0.01),
    "ridge": (ridge((3.0, 12.0), "gaussian", theta=0.3, center=(64, 64), bend=0.01,
                    domain=(0, 128, 0, 128)), 1.0),
}
lights = random_lights(20, 2)

for name, (s, h) in surfaces.items():
    pts = sample_points(s, 200, 1)
    an = residual_sweep(s, lights, pts)
    fd = residual_sweep(s, lights, pts, path="fd", h=h)
    print(f"{name:9s} p95 analytic {np.percentile(an.rel(), 95):.1e}   "
          f"finite differences {np.percentile(fd.rel(), 95):.1e}")

print("\ntwist (deg)  max |residual|")
for row in twist_sweep():
    print(f"  {row['angle_deg']:5.1f}      {row['max_abs_residual']:.2e}")
