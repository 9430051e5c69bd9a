import json
from pathlib import Path

from qualshape import cli
from qualshape.formats import write_grid
from qualshape.surfacegen import GridSpec, make_sigmoidal_bump, normals
from qualshape.renderer import RenderSpec, render

ROOT = Path(__file__).resolve().parents[1]
CONFIGS = ROOT / "configs"


def test_msc_matches_golden_counts(tmp_path):
    assert cli.main(["msc", "--config", str(CONFIGS / "bump_msc.ini"), "--out", str(tmp_path)]) == 0
    summary = json.loads((tmp_path / "msc.json").read_text())
    golden = json.loads((ROOT / "fixtures" / "bump_counts.json").read_text())
    (rec,) = summary.values()
    assert rec["raw_counts"] == golden
    assert rec["euler"] == 2
    assert list(tmp_path.glob("complex_*.json"))
    manifest = json.loads((tmp_path / "manifest_msc.json").read_text())
    assert "msc.json" in json.dumps(manifest)


def test_verify_eqs_quadratic(tmp_path):
    assert cli.main(["verify-eqs", "--config", str(CONFIGS / "quadratic.ini"),
                     "--out", str(tmp_path)]) == 0
    v = json.loads((tmp_path / "verify.json").read_text())
    assert max(v["analytic"]["p95"].values()) < 1e-7
    assert max(v["fd"]["p95"].values()) < 1e-2
    head = (tmp_path / "residuals_analytic.csv").read_text().splitlines()[0]
    assert "eq_id" in head


def _pair_config(tmp_path, a, b, extra=""):
    s = make_sigmoidal_bump((64, 64), 25, 15, domain=(0, 127, 0, 127))
    n = normals(s, GridSpec(128, 128))
    write_grid(tmp_path / "a.grid", render(n, RenderSpec.lambertian(a)))
    write_grid(tmp_path / "b.grid", render(n, RenderSpec.lambertian(b)))
    cfg = tmp_path / "cmp.ini"
    cfg.write_text(f"[run]\nresolution = 128\n{extra}\n[compare]\na = a.grid\nb = b.grid\n")
    return cfg


def test_compare_identical_inputs(tmp_path):
    L = (0.3, 0.2, 0.93)
    cfg = _pair_config(tmp_path, L, L)
    out = tmp_path / "out"
    assert cli.main(["compare", "--config", str(cfg), "--out", str(out)]) == 0
    (m,) = json.loads((out / "compare.json").read_text())["matches"]
    assert m["graph_equivalent"] is True
    assert m["pairs"] and all(p[3] == 0 for p in m["pairs"])
    assert "graph_equivalent=True" in (out / "compare.txt").read_text()
    assert list(out.glob("*.svg"))


def test_no_svg_flag(tmp_path):
    cfg = _pair_config(tmp_path, (0.3, 0.2, 0.93), (-0.25, 0.1, 0.96))
    out = tmp_path / "out"
    assert cli.main(["compare", "--config", str(cfg), "--out", str(out), "--no-svg"]) == 0
    assert not list(out.glob("*.svg"))


def test_blur_seq(tmp_path):
    cfg = tmp_path / "b.ini"
    cfg.write_text("[run]\nresolution = 128\n[blur]\nshape = circle\ncenter = 64 64\n"
                   "radius = 30\nsigmas = 4 1\n")
    assert cli.main(["blur-seq", "--config", str(cfg), "--out", str(tmp_path / "o"), "--no-svg"]) == 0
    rows = (tmp_path / "o" / "blur_seq.csv").read_text().splitlines()
    assert rows[0].startswith("sigma,hausdorff") and len(rows) == 3


def _err(capsys):
    rec = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert rec["status"] == "error"
    return rec


def test_usage_errors_exit_2(tmp_path, capsys):
    assert cli.main(["msc"]) == 2
    assert _err(capsys)["exit_code"] == 2
    assert cli.main(["nosuch", "--config", "x.ini"]) == 2
    _err(capsys)
    bad = tmp_path / "bad.ini"
    bad.write_text("[run]\nresolution = 16\n")
    assert cli.main(["synth", "--config", str(bad), "--out", str(tmp_path)]) == 2
    assert "resolution" in _err(capsys)["message"]
    assert cli.main(["msc", "--config", str(tmp_path / "missing.ini")]) == 2
    _err(capsys)


def test_parameter_errors_exit_3(tmp_path, capsys):
    cfg = tmp_path / "p.ini"
    cfg.write_text("[run]\nresolution = 64\n[surface]\nkind = SigmoidalBump\ncenter = 32 32\n"
                   "radius = -5\nheight = 10\n")
    assert cli.main(["synth", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 3
    rec = _err(capsys)
    assert rec["exit_code"] == 3 and rec["command"] == "synth"


def test_threads_do_not_change_output(tmp_path):
    cfg = _pair_config(tmp_path, (0.3, 0.2, 0.93), (-0.25, 0.1, 0.96))
    outs = [tmp_path / "t1", tmp_path / "t2"]
    for t, o in zip((1, 2), outs):
        assert cli.main(["compare", "--config", str(cfg), "--out", str(o), "--threads", str(t)]) == 0
    names = sorted(p.name for p in outs[0].iterdir())
    assert names == sorted(p.name for p in outs[1].iterdir())
    for n in names:
        assert (outs[0] / n).read_bytes() == (outs[1] / n).read_bytes(), n
