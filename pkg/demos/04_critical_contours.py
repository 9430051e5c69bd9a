"""
Critical contours
=================

Critical contours are separatrices (or loops of them) along which the
image is strongly curved across and nearly flat along.  This script
detects them in a shaded bump, prints the score of every candidate and
shows which ones pass the automatic K/M thresholds.
"""

import numpy as np

from qualshape import critcontours as cc
from qualshape import svg
from qualshape.morse import build_complex, simplify
from qualshape.renderer import RenderSpec, render
from qualshape.surfacegen import GridSpec, make_sigmoidal_bump, normals

from _common import save

grid = GridSpec(256, 256)
bump = make_sigmoidal_bump((128, 128), 50, 30, domain=(0, 255, 0, 255))
I = render(normals(bump, grid), RenderSpec.lambertian((0.3, 0.2, 0.93)))
c = simplify(build_complex(I), 0.05 * float(np.ptp(I.values)))

K, M = cc.default_thresholds(I, c)
print(f"automatic thresholds K={K:.3g} M={M:.3g}")
cands = cc.score_candidates(I, c)
for k in cands:
    print(f"  contour {k.id:2d} closed={k.closed!s:5s} length {k.length:6.1f}  "
          f"admitted={k.admitted(K, M)}")

adm = [k for k in cands if k.admitted(K, M)]
save("04_contours.svg", svg.image_figure(I.values, complex=c, contours=adm))
