"""
Contours that survive a change of lighting
==========================================

Render one surface under several admissible shading models, detect the
critical contours in each, and match them pairwise.  Matched contours
sit within a few pixels of each other and also line up with the 1-cells
of the slant image.  A two-bump surface then shows the bump template
picking out each bump from the slant complex.
"""

from qualshape import svg
from qualshape.invariance import (ContourSet, detect_bump_template, match_contours,
                                  rendering_suite)
from qualshape.renderer import RenderSpec, render
from qualshape.surfacegen import GridSpec, make_blob, make_sigmoidal_bump, normals, slant_field

from _common import save

grid = GridSpec(256, 256)
blob = make_blob(7, 4, (0, 255, 0, 255), profile="plateau")
specs = [RenderSpec.lambertian((0.3, 0.2, 0.93), name="lambert_a"),
         RenderSpec.lambertian((-0.25, 0.1, 0.96), name="lambert_b"),
         RenderSpec.specular_blend((0.2, 0.2, 0.96), exponent=20, name="specular")]

suite = rendering_suite(blob, specs, grid)
print("contours per rendering:", dict(zip(suite.names, suite.counts)))
print("pairwise agreement:", suite.pairwise_ok(), f"worst max {suite.worst_max_distance():.2f}px")
print("aligned with slant 1-cells:", suite.aligned())

# one pair drawn out
n = normals(blob, grid)
Ia, Ib = render(n, specs[0]), render(n, specs[1])
A, B = ContourSet.from_image(Ia), ContourSet.from_image(Ib)
rep = match_contours(A, B)
print(rep.summary())
fig = svg.Figure(*grid.shape[::-1])
svg.add_isophotes(fig, Ia.values)
svg.add_matches(fig, A.contours, B.contours, rep)
save("05_matches.svg", fig.render())

# bump template on two bumps
dom = (0, 255, 0, 255)
two = make_sigmoidal_bump((80, 128), 35, 20, domain=dom).plus(
    make_sigmoidal_bump((180, 128), 30, 25, base_tilt=0.0, domain=dom))
cs = ContourSet.from_image(slant_field(normals(two, grid)))
for r in detect_bump_template(cs.complex, cs.contours):
    x, y = r.minimum_position
    print(f"bump with slant minimum near ({x:.0f}, {y:.0f})")
