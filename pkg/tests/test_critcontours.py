import numpy as np
import pytest

from qualshape.critcontours import (convergence_experiment, curve_frame, densify, detect,
                                    directed_distances, experiment_canvas, hausdorff, k_sweep,
                                    score_candidates)
from qualshape.morse import build_complex, simplify
from qualshape.renderer import BlurSequence, blur_contour, blur_masses
from qualshape.surfacegen import (GridSpec, ParameterError, ScalarGrid, make_sigmoidal_bump,
                                  normals, slant_field)


def simplified(I, frac=0.05):
    return simplify(build_complex(I), frac * float(np.ptp(I.values)))


@pytest.fixture(scope="module")
def ring():
    seq = BlurSequence.circle((32, 32), 15, (2.0,))
    I = blur_contour(seq, 2.0, GridSpec(64, 64))
    return seq, I, simplified(I)


def test_ramp_has_no_contours():
    X, Y = np.meshgrid(np.arange(32.0), np.arange(32.0))
    I = ScalarGrid(0.3 * X + 0.1 * Y)
    assert detect(I, build_complex(I), K=1e-9, M=1e9) == []


def test_threshold_errors(ring):
    _, I, c = ring
    for K, M in ((0.0, 1.0), (1.0, 0.0), (-1.0, 1.0)):
        with pytest.raises(ParameterError):
            detect(I, c, K, M)


def test_blurred_circle_gives_one_closed_contour(ring):
    seq, I, c = ring
    found = detect(I, c)
    assert len(found) == 1 and found[0].closed
    assert hausdorff(found[0].polyline, seq.polyline, True, True) < 1.0
    assert set(found[0].arcs) <= {a.id for a in c.separatrices}


def test_frame_is_orthonormal(ring):
    _, I, c = ring
    for cc in score_candidates(I, c):
        assert np.allclose(np.linalg.norm(cc.u, axis=1), 1)
        assert np.allclose(np.linalg.norm(cc.w, axis=1), 1)
        assert np.allclose(np.einsum("ij,ij->i", cc.u, cc.w), 0)


def test_frame_flip_invariance(ring):
    _, I, c = ring
    P = score_candidates(I, c)[0].polyline
    u, w = curve_frame(P, True)
    u2, w2 = curve_frame(P[::-1], True)
    assert np.allclose(np.abs(np.einsum("ij,ij->i", w[::-1], w2)), 1)


def test_bump_slant_has_one_loop_around_the_apex():
    s = make_sigmoidal_bump((128, 128), 50, 30, domain=(0, 255, 0, 255))
    sl = slant_field(normals(s, GridSpec(256, 256)))
    c = simplified(sl)
    found = detect(sl, c)
    assert len(found) == 1 and found[0].closed
    apex = min((p for p in c.critical_points if p.index == 0 and not p.virtual),
               key=lambda p: p.value)
    from skimage.measure import points_in_poly
    assert points_in_poly([apex.position], found[0].polyline)[0]


def test_hand_drawn_loop_mean_distance():
    t = 2 * np.pi * np.arange(400) / 400
    r = 18 + 3 * np.sin(3 * t) + 1.5 * np.cos(5 * t + 0.4)
    P = np.column_stack([40 + r * np.cos(t), 40 + r * np.sin(t)])
    seq = BlurSequence(P, np.ones(len(P)), (1.5,), closed=True)
    (row,) = convergence_experiment(seq)
    assert row.n_admitted >= 1 and row.closed
    assert row.mean_distance < 1.0


def test_segment_recovered_at_sigma_one():
    # a dipped intensity profile gives two maxima joined through a saddle on the segment
    seq = BlurSequence.segment((10, 12), (50, 30), (1.0,), dip=0.6)
    canvas = experiment_canvas(seq)
    I = blur_contour(seq, 1.0, canvas)
    c = simplified(I)
    # the loop-free curve is weakly curved along its length, so K is given explicitly
    found = [cc for cc in detect(I, c, K=1e-4, M=1e9) if cc.kind == "saddle-max"]
    assert found
    P = canvas.to_world(np.vstack([cc.polyline for cc in found]))
    d = directed_distances(densify(P, 0.05), seq.polyline)
    assert np.mean(d < 0.5) >= 0.95


def test_zero_length_contour_rejected():
    with pytest.raises(ParameterError):
        BlurSequence.circle((10, 10), 0.0, (1.0,))


def test_k_sweep_endpoints_and_monotone(ring):
    # a curved background keeps the field generic (the bare blur is exactly flat far out)
    X, Y = np.meshgrid(np.arange(64.0), np.arange(64.0))
    I = ring[1].with_values(ring[1].values + 1e-4 * ((X - 20) ** 2 + 0.5 * (Y - 40) ** 2))
    c = simplified(I)
    M = 1e9
    Ks, counts, ach = k_sweep(I, c, M)
    assert counts[0] == sum(cc.M_achieved < M for cc in score_candidates(I, c))
    assert counts[-1] == 0
    assert (np.diff(counts) <= 0).all()
    Ks2, counts2, _ = k_sweep(I, c, M, Ks=[1e9])
    assert counts2[0] == 0


def test_k_achieved_grows_as_blur_shrinks():
    rows = convergence_experiment(BlurSequence.circle((40, 40), 20, (4, 2, 1)))
    ks = [r.K_achieved for r in rows]
    assert ks[0] < ks[1] < ks[2]


def test_taller_bump_has_larger_k():
    t = 2 * np.pi * np.arange(360) / 360
    circ = lambda cx, r: np.column_stack([cx + r * np.cos(t), 40 + r * np.sin(t)])  # noqa: E731
    pts = np.vstack([circ(30, 12), circ(80, 12)])
    m = np.concatenate([np.full(360, 1.0), np.full(360, 2.0)]) * (2 * np.pi * 12 / 360)
    I = blur_masses(pts, m, 2.0, GridSpec(110, 80))
    found = [cc for cc in detect(I, simplified(I)) if cc.closed]
    assert len(found) == 2
    left, right = sorted(found, key=lambda cc: cc.polyline[:, 0].mean())
    assert right.K_achieved > left.K_achieved


def test_threshold_monotonicity_and_linear_remap(ring):
    _, I, c = ring
    cands = score_candidates(I, c)
    K, M = 1e-3, 0.5
    a = {cc.id for cc in detect(I, c, K, M, candidates=cands)}
    b = {cc.id for cc in detect(I, c, 2 * K, 0.5 * M, candidates=cands)}
    assert b <= a
    J = I.with_values(3.0 * I.values + 7.0)
    cj = simplified(J)
    got = [(cc.arcs, cc.closed) for cc in detect(J, cj, 3 * K, 3 * M)]
    want = [(cc.arcs, cc.closed) for cc in detect(I, c, K, M)]
    assert got == want
