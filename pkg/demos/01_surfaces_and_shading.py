"""
Surfaces and their shaded images
================================

Build a sigmoidal bump, look at its height profile, then shade it three
ways: two Lambertian lights and a specular blend.  The slant image (the
angle between the normal and the view axis) is rendered alongside since
later demos use it as the light-independent reference.
"""

import numpy as np

from qualshape import svg
from qualshape.renderer import RenderSpec, admissibility_probe, render
from qualshape.surfacegen import GridSpec, make_sigmoidal_bump, normals, slant_field

from _common import save

grid = GridSpec(256, 256)
bump = make_sigmoidal_bump((128, 128), 50, 30, domain=(0, 255, 0, 255))

# height along the row through the centre: flat top, steep rim, tilted floor
z = bump.sample(grid).values
print("height along centre row:", np.round(z[128, ::32], 2))

n = normals(bump, grid)
specs = {
    "lambert_a": RenderSpec.lambertian((0.3, 0.2, 0.93)),
    "lambert_b": RenderSpec.lambertian((-0.25, 0.1, 0.96)),
    "specular": RenderSpec.specular_blend((0.2, 0.2, 0.96), exponent=20),
}
for name, spec in specs.items():
    I = render(n, spec)
    print(f"{name:10s} range {I.values.min():.3f} .. {I.values.max():.3f}")
    save(f"01_{name}.svg", svg.image_figure(I.values))

sl = slant_field(n)
save("01_slant.svg", svg.image_figure(sl.values))

# A rendering only counts as admissible if a hemisphere renders with a
# single maximum; the probe checks that on a sampled sphere.
for name, spec in specs.items():
    rep = admissibility_probe(spec)
    print(f"{name:10s} admissible={rep.admissible}")
