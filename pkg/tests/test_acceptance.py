"""Acceptance criteria 1-10, one test each.

Every test appends a one-line verdict with the measured quantities and the
wall time to the terminal summary (see conftest.py).
"""

import itertools
import time

import numpy as np
import pytest

from conftest import record
from qualshape import cli
from qualshape.critcontours import convergence_experiment
from qualshape.invariance import (ContourSet, detect_bump_template, interiors_disjoint, pearson,
                                  reconstruct_scaffold, rendering_suite)
from qualshape.morse import build_complex, combinatorially_equal, gradient_path, simplify
from qualshape.morse.oracle import neighbor_scan_counts
from qualshape.renderer import BlurSequence
from qualshape.shadingeq import (eval_ridge_eqs, find_crest, random_lights, residual_sweep,
                                 sample_points, twist_sweep)
from qualshape.surfacegen import (GridSpec, ScalarGrid, gaussian_blob_sum, make_blob,
                                  make_sigmoidal_bump, normals, quadratic, ridge, slant_field)


def verdict(n, ok, text, seconds, budget=None):
    tb = f" (budget {budget:g}s)" if budget else ""
    record(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {text}  [{seconds:.1f}s{tb}]")


# ---------------------------------------------------------------------------


def test_criterion_01_shading_identity():
    t0 = time.perf_counter()
    fixtures = {
        "quadratic": (quadratic([0, 0.1, -0.2, 0.5, 0.3, 0.8], domain=(-1, 1, -1, 1)), 0.01),
        "ridge": (ridge((3.0, 12.0), "gaussian", theta=0.3, center=(64, 64), bend=0.01,
                        domain=(0, 128, 0, 128)), 1.0),
        "blob": (make_blob(7, 5), 1.0),
    }
    lights = random_lights(20, 2)
    res = {}
    for name, (s, h) in fixtures.items():
        pts = sample_points(s, 200, 1)
        assert len(pts) == 200
        an = residual_sweep(s, lights, pts)
        fd = residual_sweep(s, lights, pts, path="fd", h=h)
        res[name] = (np.percentile(an.rel(), 95), np.percentile(fd.rel(), 95))
    dt = time.perf_counter() - t0
    ok = all(a < 1e-7 and f < 1e-2 for a, f in res.values()) and dt < 30
    verdict(1, ok, "p95 analytic/fd: " + ", ".join(f"{k} {a:.1e}/{f:.1e}" for k, (a, f) in res.items()),
            dt, 30)
    assert ok, res


def test_criterion_02_ridge_reduction():
    t0 = time.perf_counter()
    s = ridge((0, 0.3, 0.02, 0.001), "cubic", domain=(-50, 50, -50, 50))
    L = np.array([0.0, -0.3, 1.0])
    L /= np.linalg.norm(L)
    worst = 0.0
    for x in np.linspace(-40, 40, 50):
        p = find_crest(s, L, (x, 0.0), (0.0, 1.0))
        for r in eval_ridge_eqs(s, L, p):
            worst = max(worst, r.abs_residual)
    rows = twist_sweep()
    res = [r["max_abs_residual"] for r in rows]
    mono = all(b > a for a, b in zip(res, res[1:]))
    dt = time.perf_counter() - t0
    ok = worst < 1e-8 and mono and dt < 10
    verdict(2, ok, f"max crest residual {worst:.1e} at 50 points; twist 0-10 deg residual "
                   f"{res[0]:.1e} -> {res[-1]:.1e}, strictly increasing={mono}", dt, 10)
    assert ok


def _morse_fixtures():
    g = GridSpec(256, 256)
    dom = (0, 255, 0, 255)
    two = make_sigmoidal_bump((80, 128), 35, 20, domain=dom).plus(
        make_sigmoidal_bump((180, 128), 30, 25, base_tilt=0.0, domain=dom))
    return {
        "bump": make_sigmoidal_bump((128, 128), 40, 30, domain=dom).sample(g),
        "blob": make_blob(7, 5, dom).sample(g),
        "ridge": ridge((3.0, 12.0), "gaussian", theta=0.3, center=(128, 128), bend=0.01,
                       domain=dom).sample(g),
        "saddle": quadratic([0, 0.01, 0.02, 0.002, 0.0005, -0.001], (128, 128), dom).sample(g),
        "two-bump": two.sample(g),
    }


def test_criterion_03_morse_smale_correctness():
    t0 = time.perf_counter()
    rng = np.random.default_rng(3)
    problems = []
    levels_checked = 0
    for name, f in _morse_fixtures().items():
        c = build_complex(f)
        if c.counts() != neighbor_scan_counts(f.values):
            problems.append(f"{name}: counts {c.counts()} vs oracle")
        pers = np.unique(c.finite_persistences())
        for tau in np.concatenate([[0.0], pers * (1 + 1e-9)]):
            s = simplify(c, float(tau)) if tau > 0 else c
            levels_checked += 1
            if s.euler() != 2:
                problems.append(f"{name}: euler {s.euler()} at tau {tau:g}")
        arcs = c.separatrices
        pick = rng.choice(len(arcs), size=min(50, len(arcs)), replace=False)
        paths = [(a.kind, a.values) for a in (arcs[i] for i in pick)]
        H, W = f.values.shape
        while len(paths) < 100:
            seed = rng.uniform([0, 0], [W - 1, H - 1])
            paths.append(("saddle-max", gradient_path(c, seed)[:, 2]))
        for kind, v in paths:
            d = np.diff(v[np.isfinite(v)])
            if not ((d >= 0).all() if kind == "saddle-max" else (d <= 0).all()):
                problems.append(f"{name}: non-monotone {kind} path")
    dt = time.perf_counter() - t0
    ok = not problems and dt < 20
    verdict(3, ok, f"5 fixtures at 256^2, {levels_checked} simplification levels, 500 paths; "
                   f"problems={problems[:3]}", dt, 20)
    assert ok, problems


def test_criterion_04_persistence_stability():
    t0 = time.perf_counter()
    g = make_sigmoidal_bump((128, 128), 40, 30).sample(GridSpec(256, 256))
    eps = 0.01 * float(np.ptp(g.values))
    ref = simplify(build_complex(g), 3 * eps)
    equal = []
    for seed in range(10):
        v = g.values + np.random.default_rng(seed).uniform(-eps, eps, g.values.shape)
        equal.append(combinatorially_equal(ref, simplify(build_complex(ScalarGrid(v)), 3 * eps)))
    dt = time.perf_counter() - t0
    ok = all(equal) and dt < 30
    verdict(4, ok, f"{sum(equal)}/10 noise seeds equal to the noise-free complex {ref.counts()}",
            dt, 30)
    assert ok


@pytest.fixture(scope="module")
def suites(bump, admissible_suite, grid256):
    t0 = time.perf_counter()
    blob = make_blob(7, 4, (0, 255, 0, 255), profile="plateau")
    out = {"bump": rendering_suite(bump, admissible_suite, grid256),
           "blob": rendering_suite(blob, admissible_suite, grid256)}
    return out, time.perf_counter() - t0


def test_criterion_05_rendering_invariance(suites):
    res, dt = suites
    b, o = res["bump"], res["blob"]
    ok = (b.pairwise_ok() and o.pairwise_ok() and min(o.counts) >= 3 and min(b.counts) >= 1
          and dt < 120)
    verdict(5, ok, f"bump counts {b.counts} ok={b.pairwise_ok()} worst max {b.worst_max_distance():.2f}px; "
                   f"blob seed 7 counts {o.counts} ok={o.pairwise_ok()} "
                   f"worst max {o.worst_max_distance():.2f}px", dt, 120)
    assert ok


def test_criterion_06_slant_alignment(suites):
    res, dt = suites
    un = {k: {n: r.unmatched_a for n, r in s.alignment.items() if r.unmatched_a}
          for k, s in res.items()}
    ok = all(s.aligned() for s in res.values())
    verdict(6, ok, f"unmatched image contours vs slant 1-cells: {un}", 0.0)
    assert ok


def test_criterion_07_concentration_of_shading():
    t0 = time.perf_counter()
    rows = convergence_experiment(BlurSequence.circle((64, 64), 30, (6, 4, 2, 1)))
    hd = [r.hausdorff for r in rows]
    ks = [r.K_achieved for r in rows]
    dt = time.perf_counter() - t0
    ok = (None not in hd and all(b <= a for a, b in zip(hd, hd[1:])) and hd[-1] < 1.0
          and all(b > a for a, b in zip(ks, ks[1:])) and dt < 30)
    verdict(7, ok, "hausdorff " + " ".join(f"{h:.3f}" for h in hd) + "; K_achieved "
            + " ".join(f"{k:.2g}" for k in ks), dt, 30)
    assert ok


def test_criterion_08_bump_template(grid256):
    t0 = time.perf_counter()
    dom = (0, 255, 0, 255)
    s = make_sigmoidal_bump((80, 128), 35, 20, domain=dom).plus(
        make_sigmoidal_bump((180, 128), 30, 25, base_tilt=0.0, domain=dom))
    cs = ContourSet.from_image(slant_field(normals(s, grid256)))
    recs = detect_bump_template(cs.complex, cs.contours)
    disjoint = interiors_disjoint(recs, grid256.shape)
    # independent of the detector: each enclosed minimum sits on a different bump
    near = sorted(int(np.argmin([np.hypot(r.minimum_position[0] - cx, r.minimum_position[1] - 128)
                                 for cx in (80, 180)])) for r in recs)
    dt = time.perf_counter() - t0
    ok = len(recs) == 2 and disjoint and near == [0, 1] and dt < 20
    verdict(8, ok, f"{len(recs)} records, minima at "
                   f"{[tuple(round(v) for v in r.minimum_position) for r in recs]}, "
                   f"disjoint={disjoint}", dt, 20)
    assert ok


def test_criterion_09_scaffold_reconstruction(bump, grid256):
    t0 = time.perf_counter()
    H = W = 128
    f = lambda x, y: (x / 127.0) ** 2 - (y / 127.0) ** 2  # noqa: E731
    t = np.linspace(0, 2 * np.pi, 200)
    polys = [np.column_stack([np.linspace(20, 100, 50), np.linspace(30, 90, 50)]),
             np.column_stack([64 + 20 * np.cos(t), 64 + 20 * np.sin(t)])]
    R = reconstruct_scaffold(polys, f, GridSpec(W, H))
    err = float(np.abs(R.values - f(*np.meshgrid(np.arange(W), np.arange(H)))).max())

    sl = slant_field(normals(bump, grid256))
    scaffold = ContourSet.from_image(sl, candidates=True)
    r = pearson(reconstruct_scaffold(scaffold.contours, sl).values, sl.values)
    dt = time.perf_counter() - t0
    ok = err < 1e-3 and r > 0.9 and dt < 20
    verdict(9, ok, f"harmonic max error {err:.1e}; bump slant Pearson r {r:.3f} "
                   f"from {len(scaffold.contours)} slant 1-cells + border", dt, 20)
    assert err < 1e-3
    assert r > 0.9


def test_criterion_10_determinism(tmp_path):
    t0 = time.perf_counter()
    cfg = str(cli_config())
    outs = []
    for k in range(2):
        d = tmp_path / f"run{k}"
        assert cli.main(["all", "--config", cfg, "--out", str(d), "--seed", "7"]) == 0
        outs.append(d)
    a = sorted(p.name for p in outs[0].iterdir())
    b = sorted(p.name for p in outs[1].iterdir())
    same = a == b and all((outs[0] / n).read_bytes() == (outs[1] / n).read_bytes() for n in a)
    kinds = sorted({n.rsplit(".", 1)[-1] for n in a})
    dt = time.perf_counter() - t0
    verdict(10, same, f"{len(a)} files ({', '.join(kinds)}) byte-identical across two runs", dt)
    assert same


def cli_config():
    from pathlib import Path

    return Path(__file__).resolve().parents[1] / "configs" / "demo.ini"
