import json
import os

import numpy as np
import pytest

from qualshape.formats import (FormatError, complex_to_dict, dumps, grid_bytes, parse_config,
                               parse_grid, read_complex, read_config, read_grid, write_complex,
                               write_grid, write_vector_grid)
from qualshape.morse import build_complex, combinatorially_equal, simplify
from qualshape.surfacegen import GridSpec, ScalarGrid, make_blob, make_sigmoidal_bump


@pytest.fixture(scope="module")
def small_complex():
    g = make_blob(3, 3, (0, 63, 0, 63)).sample(GridSpec(64, 64))
    return simplify(build_complex(g), 0.02 * np.ptp(g.values))


def test_grid_round_trip_is_byte_stable(tmp_path, rng):
    v = rng.normal(size=(20, 30)).astype(np.float32).astype(float)
    g = ScalarGrid(v, 0.5, (1.0, -2.0), units="height")
    p = write_grid(tmp_path / "a.grid", g)
    assert oct(os.stat(p).st_mode & 0o777) == "0o644"
    h = read_grid(p)
    assert np.array_equal(h.values, v) and h.spacing == 0.5 and h.origin == (1.0, -2.0)
    assert h.units == "height"
    write_grid(tmp_path / "b.grid", h)
    assert (tmp_path / "a.grid").read_bytes() == (tmp_path / "b.grid").read_bytes()


def test_vector_grid(tmp_path):
    vec = np.zeros((4, 5, 2))
    vec[..., 0] = 1.0
    vec[0, 0] = np.nan
    p = write_vector_grid(tmp_path / "v.grid", vec)
    v, h = parse_grid(p.read_bytes())
    assert h["units"] == "vector2" and v.shape == (4, 5, 2) and v[0, 0, 0] == 0
    with pytest.raises(FormatError):
        read_grid(p)


def test_grid_errors():
    data = grid_bytes(np.ones((3, 3)))
    with pytest.raises(FormatError, match="magic"):
        parse_grid(b"XX" + data[2:])
    with pytest.raises(FormatError, match="checksum"):
        parse_grid(data[:-1] + bytes([data[-1] ^ 1]))
    with pytest.raises(FormatError, match="payload"):
        parse_grid(data[:-4])
    with pytest.raises(FormatError):
        grid_bytes(np.ones((3, 3)), units="two words")


def test_complex_json_round_trip(tmp_path, small_complex):
    a = write_complex(tmp_path / "a.json", small_complex)
    c2 = read_complex(a)
    assert combinatorially_equal(small_complex, c2)
    assert c2.counts() == small_complex.counts()
    b = write_complex(tmp_path / "b.json", c2)
    assert a.read_bytes() == b.read_bytes()
    d = json.loads(a.read_text())
    assert d["format"] == "qualshape-complex/1"
    # the virtual minimum sits at -inf and is written as null
    assert any(n["virtual"] and n["value"] is None for n in d["nodes"])


def test_dumps_rejects_nan():
    with pytest.raises(ValueError):
        dumps({"x": float("nan")})


def test_read_complex_errors(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text('{"format": "other"}')
    with pytest.raises(FormatError):
        read_complex(p)
    p.write_text("{not json")
    with pytest.raises(FormatError):
        read_complex(p)


CFG = """
[run]
seed = 3
resolution = 128
[thresholds]
K = auto
M = 0.5   # inline comment
tau = 0.02
[surface]
kind = SigmoidalBump
center = 64 64
[render.a]
kind = Lambertian
L = 0 0 1
[render.b]
kind = Slant
[verify]
lights = 4
"""


def test_config_parses():
    cfg = parse_config(CFG, "/tmp")
    assert cfg.seed == 3 and cfg.resolution == 128 and cfg.K is None and cfg.M == 0.5
    assert cfg.tau == 0.02 and cfg.delta == 3.0
    assert [n for n, _ in cfg.renders] == ["a", "b"]
    assert cfg.renders[0][1]["L"] == "0 0 1"
    assert cfg.sections["verify"]["lights"] == "4"
    assert str(cfg.path("x.grid")) == "/tmp/x.grid"
    assert cfg.digest() == parse_config(CFG).digest()


@pytest.mark.parametrize("bad", [
    CFG.replace("resolution = 128", "resolution = 32"),
    CFG.replace("M = 0.5", "M = -1"),
    CFG.replace("tau = 0.02", "tau = 0"),
    CFG.replace("seed = 3", "seed = three"),
    CFG.replace("[run]", "[run\n"),
    "[run]\nthreads = 0\n",
])
def test_config_errors(bad):
    with pytest.raises(FormatError):
        parse_config(bad)


def test_missing_config_file(tmp_path):
    with pytest.raises(FormatError):
        read_config(tmp_path / "nope.ini")


def test_contours_in_complex_json(small_complex):
    from qualshape import critcontours as cc

    g = make_sigmoidal_bump((32, 32), 15, 10, domain=(0, 63, 0, 63)).sample(GridSpec(64, 64))
    c = simplify(build_complex(g), 0.05 * np.ptp(g.values))
    cs = cc.score_candidates(g, c)
    d = complex_to_dict(c, cs, (1e-3, 0.1))
    assert len(d["contours"]) == len(cs)
    json.loads(dumps(d))
