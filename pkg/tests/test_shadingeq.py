import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from qualshape.shadingeq import (ConditioningError, DomainError, eval_eq4, eval_ridge_eqs,
                                 eval_shading_eq, find_crest, image_jet, image_jet_fd,
                                 random_lights, residual_sweep, sample_points, twist_sweep)
from qualshape.surfacegen import make_blob, quadratic, ridge, tilted_plane


def direct_intensity(s, L):
    """I(x, y) = L . N written out from the height gradient (independent of image_jet)."""
    def I(x, y):
        g = s.eval(x, y).grad
        return (L[2] - g[0] * L[0] - g[1] * L[1]) / np.sqrt(1 + g @ g)
    return I


def test_image_jet_against_direct_differences():
    s = quadratic([0, 0.1, -0.2, 0.5, 0.3, 0.8, 0.1, -0.05, 0.02, 0.03])
    L = np.array([0.3, -0.2, 0.9])
    L /= np.linalg.norm(L)
    p = np.array([0.2, -0.1])
    I0, g, H = image_jet(s, L, p)
    I = direct_intensity(s, L)
    h = 1e-4
    e = np.eye(2) * h
    assert I0 == pytest.approx(I(*p), abs=1e-14)
    fg = [(I(*(p + e[i])) - I(*(p - e[i]))) / (2 * h) for i in range(2)]
    fh = [[(I(*(p + e[i] + e[j])) - I(*(p + e[i] - e[j])) - I(*(p - e[i] + e[j]))
            + I(*(p - e[i] - e[j]))) / (4 * h * h) for j in range(2)] for i in range(2)]
    assert np.allclose(g, fg, atol=1e-8)
    assert np.allclose(H, fh, atol=1e-5)


coef = st.floats(-1, 1)


@settings(max_examples=60, deadline=None)
@given(c=st.lists(coef, min_size=10, max_size=10), lx=st.floats(-0.5, 0.5), ly=st.floats(-0.5, 0.5),
       x=st.floats(-0.3, 0.3), y=st.floats(-0.3, 0.3))
def test_identities_hold_on_random_cubics(c, lx, ly, x, y):
    s = quadratic(c, domain=(-1, 1, -1, 1))
    L = (lx, ly, 1.0)
    try:
        rs = [eval_shading_eq(s, L, (x, y), e, delta_H=1e-3) for e in "123"]
    except (ConditioningError, DomainError):
        assume(False)
    for r in rs:
        assert r.rel_residual < 1e-9


def test_fd_path_converges_with_step():
    s = quadratic([0, 0.1, -0.2, 0.5, 0.3, 0.8, 0.1, 0.0, 0.05, 0.0], domain=(-1, 1, -1, 1))
    L, p = (0.2, 0.1, 0.97), (0.3, -0.2)
    errs = [eval_shading_eq(s, L, p, "2", path="fd", h=h).abs_residual for h in (0.04, 0.02, 0.01)]
    assert errs[0] > errs[1] > errs[2]
    assert errs[1] / errs[2] == pytest.approx(4, rel=0.25)  # second-order differences
    I, g, H = image_jet_fd(s, L, p, 1e-3)
    I0, g0, H0 = image_jet(s, L, p)
    assert np.allclose(g, g0, atol=1e-6) and np.allclose(H, H0, atol=1e-4)


def test_eq4_differs_from_eq1_by_the_correction():
    s = make_blob(7, 5)
    r = eval_eq4(s, (0.2, 0.1, 0.97), (100, 120))
    assert r.lhs - r.rhs == pytest.approx(r.extra["correction"], abs=1e-12)
    # on a quadratic the third derivatives vanish and so does the correction
    q = quadratic([0, 0.1, -0.2, 0.5, 0.3, 0.8], domain=(-1, 1, -1, 1))
    r = eval_eq4(q, (0.2, 0.1, 0.97), (0.3, 0.2))
    assert r.extra["correction"] == 0 and r.rel_residual < 1e-12


def test_preconditions_raise():
    with pytest.raises(ConditioningError):
        eval_shading_eq(tilted_plane(0.1, 0.2), (0, 0, 1), (1, 1), "1")
    q = quadratic([0, 0, 0, 0.5, 0, 0.5], domain=(-1, 1, -1, 1))
    with pytest.raises(DomainError):  # grad I = 0 at the apex under a frontal light
        eval_shading_eq(q, (0, 0, 1), (0.0, 0.0), "1")
    with pytest.raises(DomainError):  # attached shadow
        eval_shading_eq(quadratic([0, 3, 0, 0.5, 0, 0.5]), (1, 0, 0.1), (0.0, 0.0), "1")


def test_ridge_equations_on_cylinder():
    s = ridge((0, 0.3, 0.02, 0.001), "cubic", domain=(-50, 50, -50, 50))
    L = np.array([0.0, -0.3, 1.0])
    for x in (-20.0, 0.0, 13.0):
        p = find_crest(s, L, (x, 0.0), (0.0, 1.0))
        assert all(r.abs_residual < 1e-12 for r in eval_ridge_eqs(s, L, p))
    with pytest.raises(DomainError):
        eval_ridge_eqs(ridge((0, 0.3, 0.02, 0.001), "cubic", twist=0.01,
                             domain=(-50, 50, -50, 50)), L, (10.0, 20.0))


def test_twist_sweep_monotone():
    rows = twist_sweep(angles_deg=[0, 2, 4, 6])
    res = [r["max_abs_residual"] for r in rows]
    assert res[0] < 1e-12 and all(b > a for a, b in zip(res, res[1:]))
    assert [round(r["angle_deg"], 6) for r in rows] == [0, 2, 4, 6]


def test_sweep_table_stats_and_csv():
    s = quadratic([0, 0.1, -0.2, 0.5, 0.3, 0.8], domain=(-1, 1, -1, 1))
    tab = residual_sweep(s, random_lights(3, 0), sample_points(s, 10, 0))
    assert len(tab) + sum(tab.skipped.values()) == 90
    csv = tab.to_csv().splitlines()
    assert csv[0] == "eq_id,decile,n,det_lo,det_hi,median,p95,max"
    assert tab.to_csv() == tab.to_csv()


def test_random_lights_in_cone():
    L = random_lights(500, 1, np.deg2rad(30))
    assert np.allclose(np.linalg.norm(L, axis=1), 1)
    assert np.all(L[:, 2] >= np.cos(np.deg2rad(30)) - 1e-12)
