"""Command-line driver.

Every subcommand reads an INI-style run configuration, applies the flag
overrides, writes its outputs atomically under the output directory and
finishes with a ``manifest_<command>.json`` listing each file with its
CRC-32.  Failures print a one-line JSON error record on stderr and exit
with 2 (bad usage or configuration) or 3 (numerical-domain failure).
"""

from __future__ import annotations

import argparse
import itertools
import json
import logging
import sys
import zlib
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import critcontours, formats, imagecalc, invariance, shadingeq, surfacegen, svg
from .formats import FormatError, RunConfig, floats, require
from .morse import build_complex, simplify
from .renderer import BlurSequence, RenderSpec, blur_contour, power_profile, render
from .surfacegen import GridSpec, ParameterError, ScalarGrid

log = logging.getLogger("qualshape")

EXIT_USAGE = 2
EXIT_NUMERIC = 3
NUMERIC_ERRORS = (ParameterError, shadingeq.ConditioningError, shadingeq.DomainError,
                  np.linalg.LinAlgError, FloatingPointError, ValueError)


class UsageError(Exception):
    pass


# ---------------------------------------------------------------------------
# config -> objects


def surface_grid(cfg: RunConfig, surf) -> GridSpec:
    x0, x1, y0, y1 = surf.domain
    n = cfg.resolution
    return GridSpec(n, n, spacing=max(x1 - x0, y1 - y0) / (n - 1), origin=(x0, y0))


def build_surface(cfg: RunConfig) -> surfacegen.AnalyticSurface:
    d = cfg.surface
    if not d:
        raise FormatError("config has no [surface] section")
    kind = require(d, "kind", "surface")
    n = cfg.resolution
    dom = floats(d["domain"], 4, "domain") if "domain" in d else (0.0, n - 1.0, 0.0, n - 1.0)
    get = lambda k, default=None: float(d[k]) if k in d else default  # noqa: E731
    if kind == "SigmoidalBump":
        c = floats(d.get("center", f"{0.5 * (dom[0] + dom[1])} {0.5 * (dom[2] + dom[3])}"), 2, "center")
        return surfacegen.make_sigmoidal_bump(c, float(require(d, "radius", "surface")),
                                              float(require(d, "height", "surface")),
                                              get("base_tilt"), width=get("width"),
                                              tilt_angle=get("tilt_angle", 0.4), domain=dom)
    if kind == "GaussianBlobSum":
        seed = int(d.get("seed", cfg.seed))
        return surfacegen.make_blob(seed, int(d.get("n_lobes", 4)), dom, tilt=get("tilt"),
                                    steepness=get("steepness", 2.0),
                                    profile=d.get("profile", "gaussian"), flank=get("flank", 0.15))
    if kind == "Ridge":
        return surfacegen.ridge(floats(require(d, "coeffs", "surface")), d.get("profile", "cubic"),
                                theta=get("theta", 0.0),
                                center=floats(d.get("center", "0 0"), 2, "center"),
                                bend=get("bend", 0.0), twist=get("twist", 0.0), domain=dom)
    if kind == "Quadratic":
        return surfacegen.quadratic(floats(require(d, "coeffs", "surface")),
                                    floats(d.get("center", "0 0"), 2, "center"), domain=dom)
    if kind == "TiltedPlane":
        return surfacegen.tilted_plane(get("slope_x", 0.0), get("slope_y", 0.0),
                                       get("offset", 0.0), domain=dom)
    raise FormatError(f"unknown surface kind {kind!r}")


def build_render(name: str, d: dict) -> RenderSpec:
    variant = require(d, "variant", f"render.{name}")
    L = floats(d.get("L", "0 0 1"), 3, "L")
    if variant == "Lambertian":
        return RenderSpec.lambertian(L, float(d.get("albedo", 1.0)), name=name)
    if variant == "Specular":
        return RenderSpec.specular_blend(L, float(d.get("exponent", 20)), float(d.get("diffuse", 0.7)),
                                         float(d.get("specular", 0.3)), name=name)
    if variant == "SlantImage":
        return RenderSpec.slant(name=name)
    if variant == "MonotoneOfCos":
        return RenderSpec.monotone_of_cos(L, power_profile(float(d.get("power", 0.5))), name=name)
    raise FormatError(f"[render.{name}] unknown variant {variant!r}")


class Run:
    """Shared state of one invocation: config, output directory, written files."""

    def __init__(self, cfg: RunConfig, command: str):
        self.cfg = cfg
        self.command = command
        self.out = Path(cfg.out) if Path(cfg.out).is_absolute() else Path.cwd() / cfg.out
        self.written: list[Path] = []
        self._images = None

    def write(self, name: str, data) -> Path:
        p = formats.atomic_write(self.out / name, data)
        self.written.append(p)
        return p

    def write_grid(self, name: str, g: ScalarGrid) -> Path:
        return self.write(name, formats.grid_bytes(g.values, g.spacing, g.origin, g.units))

    def write_json(self, name: str, obj) -> Path:
        return self.write(name, formats.dumps(obj))

    def write_svg(self, name: str, text: str) -> None:
        if self.cfg.svg:
            self.write(name, text)

    def pool_map(self, fn, items):
        items = list(items)
        if self.cfg.threads <= 1 or len(items) < 2:
            return [fn(x) for x in items]
        with ThreadPoolExecutor(self.cfg.threads) as ex:
            return list(ex.map(fn, items))

    def images(self) -> list[tuple[str, ScalarGrid]]:
        """Renderings of the configured surface, one per ``[render.*]`` section."""
        if self._images is None:
            if not self.cfg.renders:
                raise FormatError("config has no [render.*] sections")
            surf = build_surface(self.cfg)
            n = surfacegen.normals(surf, surface_grid(self.cfg, surf))
            specs = [(name, build_render(name, d)) for name, d in self.cfg.renders]
            self._images = self.pool_map(lambda t: (t[0], render(n, t[1])), specs)
            self._slant = [name for name, s in specs if s.variant == "SlantImage"]
        return self._images

    def manifest(self) -> None:
        files = []
        for p in sorted(set(self.written)):
            files.append({"file": p.name, "crc32": f"{zlib.crc32(p.read_bytes()):08x}",
                          "bytes": p.stat().st_size})
        self.write_json(f"manifest_{self.command}.json",
                        {"command": self.command, "config_crc32": self.cfg.digest(),
                         "seed": self.cfg.seed, "files": files})


def _range(g: ScalarGrid) -> float:
    return float(np.ptp(g.values))


def _contour_set(run: Run, name: str, g: ScalarGrid, candidates=False) -> invariance.ContourSet:
    return invariance.ContourSet.from_image(g, K=run.cfg.K, M=run.cfg.M, tau_fraction=run.cfg.tau,
                                            candidates=candidates, name=name)


def _input_grids(run: Run, section: str, keys) -> list[tuple[str, ScalarGrid]] | None:
    d = run.cfg.sections.get(section, {})
    found = [k for k in keys if k in d]
    if not found:
        return None
    out = []
    for k in found:
        try:
            out.append((Path(d[k]).stem, formats.read_grid(run.cfg.path(d[k]))))
        except OSError as e:
            raise FormatError(f"[{section}] {k}: cannot read {d[k]}: {e.strerror}") from None
    return out


# ---------------------------------------------------------------------------
# subcommands


def cmd_synth(run: Run) -> None:
    surf = build_surface(run.cfg)
    grid = surface_grid(run.cfg, surf)
    h = surf.sample(grid)
    n = surfacegen.normals(surf, grid)
    sl = surfacegen.slant_field(n)
    run.write_grid("height.grid", h)
    run.write_grid("slant.grid", sl)
    run.write("normals_xy.grid", formats.grid_bytes(n.n[..., :2], grid.spacing, grid.origin))
    params = json.loads(json.dumps(surf.params, default=lambda o: np.asarray(o).tolist()))
    run.write_json("surface.json", {"kind": surf.kind, "params": params, "domain": list(surf.domain),
                                    "resolution": run.cfg.resolution, "spacing": grid.spacing})
    run.write_svg("height.svg", svg.image_figure(h.values))
    run.write_svg("slant.svg", svg.image_figure(sl.values))


def cmd_render(run: Run) -> None:
    meta = {}
    for name, g in run.images():
        run.write_grid(f"render_{name}.grid", g)
        fr = imagecalc.shading_flow(g)
        run.write(f"flow_{name}.grid", formats.grid_bytes(fr.v, g.spacing, g.origin))
        meta[name] = {k: v for k, v in sorted(g.meta.items())}
        run.write_svg(f"render_{name}.svg", svg.image_figure(g.values, needles=fr.v, needle_mask=fr.mask))
    run.write_json("render.json", meta)


def cmd_msc(run: Run) -> None:
    imgs = _input_grids(run, "msc", ["input"]) or run.images()

    def job(t):
        name, g = t
        c = build_complex(g)
        s = simplify(c, run.cfg.tau * _range(g))
        return name, g, c.counts(), s

    summary = {}
    for name, g, raw, s in run.pool_map(job, imgs):
        run.write(f"complex_{name}.json", formats.dumps(formats.complex_to_dict(s)))
        summary[name] = {"raw_counts": raw, "counts": s.counts(), "euler": s.euler(),
                         "tau": run.cfg.tau * _range(g)}
        run.write_svg(f"complex_{name}.svg", svg.image_figure(g.values, complex=s))
    run.write_json("msc.json", summary)


def cmd_contours(run: Run) -> None:
    imgs = _input_grids(run, "contours", ["input"]) or run.images()

    def job(t):
        name, g = t
        c = simplify(build_complex(g), run.cfg.tau * _range(g))
        K0, M0 = critcontours.default_thresholds(g, c, eps_grad=run.cfg.eps_grad)
        K = run.cfg.K or K0
        M = run.cfg.M or M0
        return name, g, c, critcontours.score_candidates(g, c), (K, M)

    summary = {}
    for name, g, c, cands, (K, M) in run.pool_map(job, imgs):
        run.write(f"contours_{name}.json", formats.dumps(formats.complex_to_dict(c, cands, (K, M))))
        adm = [cc for cc in cands if cc.admitted(K, M)]
        summary[name] = {"K": K, "M": M, "candidates": len(cands), "admitted": [cc.id for cc in adm]}
        run.write_svg(f"contours_{name}.svg", svg.image_figure(g.values, complex=c, contours=adm))
    run.write_json("contours.json", summary)


def _match_svg(run: Run, fname: str, base: ScalarGrid, A, B, rep) -> None:
    if not run.cfg.svg:
        return
    v = base.values
    fig = svg.Figure(v.shape[1], v.shape[0])
    svg.add_isophotes(fig, v)
    svg.add_matches(fig, A, B, rep)
    run.write(fname, fig.render())


def cmd_compare(run: Run) -> None:
    pair = _input_grids(run, "compare", ["a", "b"])
    delta = run.cfg.delta
    out = {"delta": delta, "tau": run.cfg.tau, "matches": [], "alignment": []}
    text = []
    if pair is not None:
        if len(pair) != 2:
            raise FormatError("[compare] needs both 'a' and 'b'")
        (na, ga), (nb, gb) = pair
        sets = run.pool_map(lambda t: _contour_set(run, *t), [("a", ga), ("b", gb)])
        rep = invariance.match_contours(sets[0], sets[1], delta)
        out["matches"].append({"a": na, "b": nb, **rep.to_dict()})
        text += [f"{na} vs {nb}", rep.summary()]
        _match_svg(run, "match_a_b.svg", ga, sets[0].contours, sets[1].contours, rep)
    else:
        imgs = run.images()
        sets = dict(zip([n for n, _ in imgs],
                        run.pool_map(lambda t: _contour_set(run, *t), imgs)))
        grids = dict(imgs)
        for a, b in itertools.combinations(sets, 2):
            rep = invariance.match_contours(sets[a], sets[b], delta)
            out["matches"].append({"a": a, "b": b, **rep.to_dict()})
            text += [f"{a} vs {b}", rep.summary()]
            _match_svg(run, f"match_{a}__{b}.svg", grids[a], sets[a].contours, sets[b].contours, rep)
        for s in run._slant:
            slant = _contour_set(run, s, grids[s], candidates=True)
            for a in sets:
                if a in run._slant:
                    continue
                rep = invariance.align_with_slant(sets[a], slant, delta)
                out["alignment"].append({"image": a, "slant": s, **rep.to_dict()})
                text += [f"{a} vs slant 1-cells ({s})", rep.summary()]
    run.write_json("compare.json", out)
    run.write("compare.txt", "\n".join(text) + "\n")


def cmd_verify_eqs(run: Run) -> None:
    surf = build_surface(run.cfg)
    d = run.cfg.sections.get("verify", {})
    rng = np.random.default_rng(run.cfg.seed)
    lights = shadingeq.random_lights(int(d.get("lights", 20)), rng,
                                     np.deg2rad(float(d.get("max_polar_deg", 60))))
    pts = shadingeq.sample_points(surf, int(d.get("points", 200)), rng, delta_H=run.cfg.delta_H)
    eqs = tuple(d.get("eqs", "1 2 3").replace(",", " ").split())
    paths = d.get("path", "analytic").split()
    summary = {}
    for path in paths:
        if path not in ("analytic", "fd"):
            raise FormatError(f"[verify] unknown path {path!r}")
        h = float(d.get("h", surface_grid(run.cfg, surf).spacing)) if path == "fd" else None
        tab = shadingeq.residual_sweep(surf, lights, pts, eqs, path=path, h=h, delta_H=run.cfg.delta_H,
                                       eps_grad=run.cfg.eps_grad or shadingeq.EPS_GRAD)
        if not len(tab):
            raise ParameterError("no (light, point) pair passed the preconditions")
        run.write(f"residuals_{path}.csv", tab.to_csv())
        run.write(f"residual_rows_{path}.csv", tab.rows_csv())
        summary[path] = {"n": len(tab), "skipped": dict(sorted(tab.skipped.items())),
                         "p95": {r["eq_id"]: r["p95"] for r in tab.stats() if r["decile"] == "all"}}
    if "twist" in d:
        rows = shadingeq.twist_sweep(angles_deg=np.linspace(0, float(d["twist"]), 11))
        buf = ["angle_deg,twist,max_abs_residual"]
        buf += [f"{r['angle_deg']!r},{r['twist']!r},{r['max_abs_residual']!r}" for r in rows]
        run.write("twist_sweep.csv", "\n".join(buf) + "\n")
    run.write_json("verify.json", summary)


def build_blur_sequence(d: dict) -> BlurSequence:
    shape = d.get("shape", "circle")
    sigmas = floats(d.get("sigmas", "6 4 2 1"), None, "sigmas")
    inten = float(d.get("intensity", 1.0))
    if shape == "circle":
        return BlurSequence.circle(floats(d.get("center", "64 64"), 2, "center"),
                                   float(d.get("radius", 30)), sigmas, inten)
    if shape == "segment":
        return BlurSequence.segment(floats(require(d, "p0", "blur"), 2, "p0"),
                                    floats(require(d, "p1", "blur"), 2, "p1"), sigmas, inten,
                                    dip=float(d.get("dip", 0.0)))
    raise FormatError(f"[blur] unknown shape {shape!r}")


def cmd_blur_seq(run: Run) -> None:
    seq = build_blur_sequence(run.cfg.sections.get("blur", {}))
    rows = critcontours.convergence_experiment(seq, run.cfg.K, run.cfg.M, tau_fraction=run.cfg.tau)
    fmt = lambda x: "" if x is None else repr(x)  # noqa: E731
    lines = ["sigma,hausdorff,mean_distance,K_achieved,M_achieved,n_admitted,closed"]
    for r in rows:
        lines.append(",".join([repr(r.sigma), fmt(r.hausdorff), fmt(r.mean_distance), fmt(r.K_achieved),
                               fmt(r.M_achieved), str(r.n_admitted), fmt(r.closed)]))
    run.write("blur_seq.csv", "\n".join(lines) + "\n")
    if run.cfg.svg:
        canvas = critcontours.experiment_canvas(seq)
        g = blur_contour(seq, seq.sigmas[-1], canvas)
        fig = svg.Figure(canvas.width, canvas.height, scale=1.0)
        svg.add_isophotes(fig, g.values)
        svg.add_polylines(fig, [canvas.to_pixel(seq.polyline)], "#ff8c00", seq.closed, 1.0,
                          "alpha", dash="3,2")
        run.write("blur_seq.svg", fig.render())


COMMANDS = {
    "synth": cmd_synth,
    "render": cmd_render,
    "msc": cmd_msc,
    "contours": cmd_contours,
    "compare": cmd_compare,
    "verify-eqs": cmd_verify_eqs,
    "blur-seq": cmd_blur_seq,
}


# ---------------------------------------------------------------------------
# entry point


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def make_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="run configuration (INI)")
    common.add_argument("--out", help="output directory (overrides [run] out)")
    common.add_argument("--seed", type=int, help="random seed (overrides [run] seed)")
    common.add_argument("--threads", type=int, help="worker threads")
    common.add_argument("--k", type=float, help="K threshold (curvature across contours)")
    common.add_argument("--m", type=float, help="M threshold (gradient / twist bound)")
    common.add_argument("--tau", type=float, help="persistence threshold, fraction of image range")
    common.add_argument("--delta", type=float, help="matching tolerance in pixels")
    common.add_argument("--svg", action=argparse.BooleanOptionalAction, default=None,
                        help="write SVG figures")
    common.add_argument("-v", "--verbose", action="store_true")
    p = _Parser(prog="qualshape", description="Critical contours of shaded images.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in list(COMMANDS) + ["all"]:
        sub.add_parser(name, parents=[common])
    return p


def load_config(ns) -> RunConfig:
    cfg = formats.read_config(ns.config)
    over = {"out": ns.out, "seed": ns.seed, "threads": ns.threads, "K": ns.k, "M": ns.m,
            "tau": ns.tau, "delta": ns.delta, "svg": ns.svg}
    kw = {k: v for k, v in over.items() if v is not None}
    if "out" not in kw and not Path(cfg.out).is_absolute():
        kw["out"] = str(cfg.path(cfg.out))
    if kw:
        fields = {f: getattr(cfg, f) for f in cfg.__dataclass_fields__}
        fields.update(kw)
        cfg = RunConfig(**fields)
    return cfg


def _error(exit_code: int, e: BaseException, command) -> int:
    rec = {"status": "error", "exit_code": exit_code, "command": command,
           "error": type(e).__name__, "message": str(e)}
    sys.stderr.write(json.dumps(rec) + "\n")
    return exit_code


def main(argv=None) -> int:
    command = None
    try:
        ns = make_parser().parse_args(argv)
        command = ns.command
        logging.basicConfig(level=logging.INFO if ns.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        cfg = load_config(ns)
        names = list(COMMANDS) if command == "all" else [command]
        for name in names:
            run = Run(cfg, name)
            COMMANDS[name](run)
            run.manifest()
    except (UsageError, FormatError) as e:
        return _error(EXIT_USAGE, e, command)
    except NUMERIC_ERRORS as e:
        return _error(EXIT_NUMERIC, e, command)
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
