import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qualshape.morse import build_complex
from qualshape.renderer import (BlurSequence, RenderSpec, admissibility_probe, blur_contour,
                                blur_masses, render, unit_light)
from qualshape.surfacegen import (GridSpec, NormalField, ParameterError, make_sigmoidal_bump,
                                  normals, slant_field, tilted_plane)


def random_normals(rng, n=500):
    v = rng.normal(size=(n, 3))
    v[:, 2] = np.abs(v[:, 2])
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def test_lambertian_is_clamped_cosine(rng):
    n = random_normals(rng)
    L = unit_light((0.3, -0.2, 0.9))
    spec = RenderSpec.lambertian(L, albedo=0.8)
    assert np.allclose(spec.shade(n), 0.8 * np.maximum(n @ L, 0))


def test_specular_blend_formula(rng):
    n = random_normals(rng)
    L = unit_light((0.2, 0.1, 1.0))
    h = (L + [0, 0, 1]) / np.linalg.norm(L + [0, 0, 1])
    spec = RenderSpec.specular_blend(L, exponent=10, diffuse=0.6, specular=0.4)
    want = 0.6 * np.maximum(n @ L, 0) + 0.4 * np.maximum(n @ h, 0) ** 10
    assert np.allclose(spec.shade(n), want)


def test_slant_image_matches_slant_field():
    s = make_sigmoidal_bump((32, 32), 12, 6, domain=(0, 63, 0, 63))
    n = normals(s, GridSpec(64, 64))
    I = render(n, RenderSpec.slant())
    assert np.allclose(I.values, slant_field(n).values / (np.pi / 2))


def test_output_range_and_shadow_warning():
    # a steep plane facing away from the light is mostly in attached shadow
    n = normals(tilted_plane(3.0, 0.0), GridSpec(16, 16))
    I = render(n, RenderSpec.lambertian((0.9, 0.0, 0.3)))
    assert I.values.min() >= 0 and I.values.max() <= 1
    assert I.meta["shadow_warning"] and I.meta["shadow_fraction"] == 1.0
    ok = render(n, RenderSpec.lambertian((-0.5, 0.0, 0.9)))
    assert not ok.meta["shadow_warning"]


def test_monotone_of_cos_default_profile(rng):
    n = random_normals(rng)
    spec = RenderSpec.monotone_of_cos((0, 0, 1))
    assert np.allclose(spec.shade(n), np.sqrt(np.maximum(n[:, 2], 0)))


@pytest.mark.parametrize("kw", [
    dict(variant="Lambertian", L=(0.0, 0.0, 2.0)),
    dict(variant="Lambertian", L=(1.0, 0.0, 0.0)),
    dict(variant="Lambertian", albedo=0.0),
    dict(variant="Specular", exponent=0.5),
    dict(variant="Specular", diffuse=0.8, specular=0.5),
    dict(variant="Phong"),
])
def test_render_spec_validation(kw):
    with pytest.raises(ParameterError):
        RenderSpec(**kw)


def test_admissibility_probe():
    assert admissibility_probe(RenderSpec.lambertian((0.3, 0.2, 0.93))).admissible
    assert admissibility_probe(RenderSpec.specular_blend((0.2, 0.2, 0.96))).admissible
    # a tight highlight far from the diffuse peak gives a second maximum
    two = admissibility_probe(RenderSpec.specular_blend((0.9, 0, 0.44), 100, 0.3, 0.7))
    assert two.n_maxima == 2 and not two.admissible


# ---------------------------------------------------------------------------
# contour blur


@settings(max_examples=20, deadline=None)
@given(sigma=st.floats(0.5, 4.0), spacing=st.sampled_from([0.25, 0.5, 1.0]))
def test_blur_conserves_mass(sigma, spacing):
    seq = BlurSequence.circle((20, 20), 6, (sigma,), intensity=2.0)
    canvas = GridSpec(int(41 / spacing), int(41 / spacing), spacing)
    I = blur_contour(seq, sigma, canvas)
    assert I.values.sum() * spacing**2 == pytest.approx(2.0 * seq.length, rel=1e-6)


def test_blur_of_point_is_gaussian():
    canvas = GridSpec(41, 41)
    I = blur_masses([[20.0, 20.0]], [1.0], 3.0, canvas).values
    x = np.arange(41) - 20
    g = np.exp(-x**2 / 18.0)
    g = g / g[np.abs(x) <= 9].sum()
    assert np.allclose(I, np.outer(g, g) * (np.abs(x)[:, None] <= 9) * (np.abs(x)[None] <= 9))


def test_blur_margin_and_schedule_checks():
    seq = BlurSequence.circle((10, 10), 5, (2.0,))
    with pytest.raises(ParameterError):
        blur_contour(seq, 2.0, GridSpec(20, 20))
    with pytest.raises(ParameterError):
        BlurSequence.circle((10, 10), 5, (2.0, 3.0))
    with pytest.raises(ParameterError):
        BlurSequence(np.array([[0, 0], [1, 1.0]]), np.ones(2), (1.0,))
    with pytest.raises(ParameterError):
        BlurSequence.segment((0, 0), (1, 1), (1.0,), dip=1.0)


def test_segment_dip_splits_the_hump():
    canvas = GridSpec(80, 40)
    plain = BlurSequence.segment((15, 20), (65, 20), (2.0,))
    dipped = BlurSequence.segment((15, 20), (65, 20), (2.0,), dip=0.6)
    for seq, n_max in ((plain, 1), (dipped, 2)):
        I = blur_contour(seq, 2.0, canvas)
        c = build_complex(I)
        # the empty background contributes zero-persistence extrema
        floor = 1e-6 * np.ptp(I.values)
        maxima = [p for p in c.critical_points if p.index == 2 and p.persistence > floor]
        assert len(maxima) == n_max
        for p in maxima:
            assert abs(p.position[1] - 20) <= 1
