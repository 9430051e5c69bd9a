import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from qualshape.morse import (build_complex, combinatorially_equal, gradient_path, ms_graph,
                             persistence_pairs, simplify, simplify_fraction)
from qualshape.morse.oracle import neighbor_scan_counts
from qualshape.surfacegen import GridSpec, ScalarGrid, gaussian_blob_sum, make_sigmoidal_bump

grids = st.tuples(st.integers(8, 20), st.integers(8, 20)).flatmap(
    lambda s: arrays(np.float64, s, elements=st.floats(-4, 4, width=16)))


@settings(max_examples=60, deadline=None)
@given(v=grids)
def test_counts_match_neighbour_scan_oracle(v):
    # width-16 floats produce plenty of exact ties
    c = build_complex(ScalarGrid(v))
    assert c.counts() == neighbor_scan_counts(v)
    assert c.euler() == 2


@settings(max_examples=30, deadline=None)
@given(v=grids)
def test_separatrices_are_monotone(v):
    c = build_complex(ScalarGrid(v))
    for a in c.separatrices:
        d = np.diff(a.values[np.isfinite(a.values)])
        assert (d >= 0).all() if a.kind == "saddle-max" else (d <= 0).all()
        assert c.point(a.origin).index == 1
        assert c.point(a.destination).index == (2 if a.kind == "saddle-max" else 0)


def test_two_cells_tile_the_domain(rng):
    v = rng.normal(size=(20, 25))
    c = build_complex(ScalarGrid(v))
    assert sum(f.area for f in c.cells2) == pytest.approx(19 * 24)
    for f in c.cells2:
        assert c.point(f.min).index == 0 and c.point(f.max).index == 2
        assert all(c.point(s).index == 1 for s in f.saddles)


def test_simplification_keeps_euler_and_reduces(rng):
    c = build_complex(ScalarGrid(rng.normal(size=(24, 24))))
    prev = sum(c.counts().values())
    for tau in np.quantile(c.finite_persistences(), [0.1, 0.5, 0.9, 1.0]) * (1 + 1e-12):
        s = simplify(c, float(tau))
        assert s.euler() == 2
        n = sum(s.counts().values())
        assert n <= prev
        prev = n
        assert all(p.persistence > tau for p in s.pairs)
    top = simplify(c, 1e9)
    assert top.counts() == {"min": 1, "saddle": 0, "max": 1}


def test_single_blob_complex():
    s = gaussian_blob_sum([((32, 32), np.eye(2) * 60, 1.0)], tilt=1e-4, domain=(0, 63, 0, 63))
    c = build_complex(s.sample(GridSpec(64, 64)))
    # the tilt adds a low corner maximum; the blob carries the essential one
    top = max((p for p in c.critical_points if p.index == 2), key=lambda p: p.persistence)
    assert top.position == pytest.approx((32, 32), abs=1)
    assert simplify(c, 0.01).counts()["max"] == 1


def test_monotone_remap_invariance(rng):
    v = rng.normal(size=(18, 22))
    a = build_complex(ScalarGrid(v))
    b = build_complex(ScalarGrid(np.tanh(v) * 3 + 1))
    assert combinatorially_equal(a, b)
    assert a.counts() == b.counts()


def test_noise_is_simplified_away():
    g = make_sigmoidal_bump((32, 32), 12, 10, domain=(0, 63, 0, 63)).sample(GridSpec(64, 64))
    eps = 0.01 * np.ptp(g.values)
    ref = simplify(build_complex(g), 3 * eps)
    noisy = g.values + np.random.default_rng(1).uniform(-eps, eps, g.values.shape)
    raw = build_complex(ScalarGrid(noisy))
    assert sum(raw.counts().values()) > sum(ref.counts().values())
    assert combinatorially_equal(ref, simplify(raw, 3 * eps))


def test_gradient_path_ascends_to_a_maximum(rng):
    c = build_complex(ScalarGrid(rng.normal(size=(16, 16))))
    for seed in rng.uniform(0, 15, size=(20, 2)):
        p = gradient_path(c, seed)
        assert (np.diff(p[:, 2]) >= 0).all()
        assert any(q.index == 2 and q.position == pytest.approx(tuple(p[-1, :2]))
                   for q in c.critical_points)


def test_persistence_pairs_and_fraction(rng):
    v = rng.normal(size=(16, 16))
    c = build_complex(ScalarGrid(v))
    pp = persistence_pairs(c)
    assert all(p >= 0 and a.index == 1 and b.index in (0, 2) for a, b, p in pp)
    s = simplify_fraction(c, 0.2)
    assert s.provenance["threshold"] == pytest.approx(0.2 * np.ptp(v))
    G = ms_graph(c)
    assert G.number_of_edges() == len(c.separatrices)
