"""
Filling in from a scaffold
==========================

Fix a field along a few curves and on the image border, then fill the
rest by solving Laplace's equation.  A harmonic field is recovered
exactly; the slant of a bump is recovered only roughly from its slant
1-cells, since the interior of the flat top carries no constraint.
"""

import numpy as np

from qualshape.invariance import ContourSet, pearson, reconstruct_scaffold
from qualshape.surfacegen import GridSpec, make_sigmoidal_bump, normals, slant_field

f = lambda x, y: (x / 127.0) ** 2 - (y / 127.0) ** 2  # noqa: E731
t = np.linspace(0, 2 * np.pi, 200)
polys = [np.column_stack([64 + 20 * np.cos(t), 64 + 20 * np.sin(t)])]
R = reconstruct_scaffold(polys, f, GridSpec(128, 128))
yy, xx = np.mgrid[0:128, 0:128]
print(f"harmonic field: max error {np.abs(R.values - f(xx, yy)).max():.1e}")

grid = GridSpec(256, 256)
bump = make_sigmoidal_bump((128, 128), 50, 30, domain=(0, 255, 0, 255))
sl = slant_field(normals(bump, grid))
scaffold = ContourSet.from_image(sl, candidates=True)
Rs = reconstruct_scaffold(scaffold.contours, sl)
print(f"bump slant from {len(scaffold.contours)} 1-cells: Pearson r {pearson(Rs.values, sl.values):.3f}")
