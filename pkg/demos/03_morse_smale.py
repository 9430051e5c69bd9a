"""
Morse-Smale complex of an image
===============================

Build the complex of a shaded blob, compare its raw critical-point counts
with a brute-force neighbour scan, and watch the counts fall as
persistence simplification removes the weaker pairs.  The Euler
characteristic (max - saddle + min) stays 2 throughout.
"""

import numpy as np

from qualshape import svg
from qualshape.morse import build_complex, simplify
from qualshape.morse.oracle import neighbor_scan_counts
from qualshape.renderer import RenderSpec, render
from qualshape.surfacegen import GridSpec, make_blob, normals

from _common import save

grid = GridSpec(256, 256)
blob = make_blob(7, 4, (0, 255, 0, 255), profile="plateau")
I = render(normals(blob, grid), RenderSpec.lambertian((0.3, 0.2, 0.93)))

c = build_complex(I)
print("raw counts    ", c.counts())
print("neighbour scan", neighbor_scan_counts(I.values))

rng = float(np.ptp(I.values))
for frac in (0.0, 0.01, 0.05, 0.2):
    s = simplify(c, frac * rng) if frac else c
    k = s.counts()
    print(f"tau {frac:4.2f} of range: {k}  euler {s.euler()}")

save("03_complex.svg", svg.image_figure(I.values, complex=simplify(c, 0.05 * rng)))
