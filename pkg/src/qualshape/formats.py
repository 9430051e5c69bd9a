"""File formats: grid rasters, complex JSON, run configuration.

Grid files are an 8-line ASCII header followed by little-endian float32
samples in row-major order::

    QSGRID 1
    width 256
    height 256
    spacing 1 0 0          (spacing, origin x, origin y)
    units intensity        (a tag; "vector2" marks a two-channel field)
    min 0.0
    max 1.0
    checksum <crc32 of the payload, 8 hex digits>

Everything written goes through :func:`atomic_write` (temp file + rename).
"""

from __future__ import annotations

import configparser
import json
import math
import os
import tempfile
import zlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .morse import CriticalPoint, MSComplex, PersistencePair, Separatrix, TwoCell
from .surfacegen import ParameterError, ScalarGrid

GRID_MAGIC = "QSGRID 1"
COMPLEX_FORMAT = "qualshape-complex/1"


class FormatError(ValueError):
    """Malformed file or configuration."""


def atomic_write(path, data) -> Path:
    """Write ``data`` (str or bytes) to ``path`` via a temp file in the same directory."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if isinstance(data, str):
        data = data.encode("utf-8")
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.chmod(tmp, 0o644)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


# ---------------------------------------------------------------------------
# grids


def _fmt(x: float) -> str:
    return repr(float(x))


def grid_bytes(values: np.ndarray, spacing: float = 1.0, origin=(0.0, 0.0),
               units: str = "intensity") -> bytes:
    """Encode a ``(H, W)`` or ``(H, W, 2)`` array in the grid format."""
    v = np.asarray(values)
    if v.ndim == 3:
        if v.shape[2] != 2:
            raise FormatError("multi-channel grids must have exactly 2 channels")
        units = "vector2"
    elif v.ndim != 2:
        raise FormatError("grid values must be 2-D")
    payload = np.ascontiguousarray(v, dtype="<f4").tobytes()
    f32 = np.frombuffer(payload, dtype="<f4")
    lo = float(f32.min()) if f32.size else 0.0
    hi = float(f32.max()) if f32.size else 0.0
    header = [GRID_MAGIC,
              f"width {v.shape[1]}",
              f"height {v.shape[0]}",
              f"spacing {_fmt(spacing)} {_fmt(origin[0])} {_fmt(origin[1])}",
              f"units {units}",
              f"min {_fmt(lo)}",
              f"max {_fmt(hi)}",
              f"checksum {zlib.crc32(payload):08x}"]
    if any(ch.isspace() for ch in units) or not units:
        raise FormatError("units tag must be a single non-empty word")
    return ("\n".join(header) + "\n").encode("ascii") + payload


def write_grid(path, grid: ScalarGrid) -> Path:
    return atomic_write(path, grid_bytes(grid.values, grid.spacing, grid.origin, grid.units))


def write_vector_grid(path, vec: np.ndarray, spacing: float = 1.0, origin=(0.0, 0.0)) -> Path:
    """Two-channel field, e.g. a flow direction; NaNs are stored as zeros."""
    return atomic_write(path, grid_bytes(np.nan_to_num(np.asarray(vec, float)), spacing, origin))


def parse_grid(data: bytes) -> tuple[np.ndarray, dict]:
    lines = data.split(b"\n", 8)
    if len(lines) < 9 or lines[0].decode("ascii", "replace") != GRID_MAGIC:
        raise FormatError("not a grid file (bad magic)")
    try:
        head = [ln.decode("ascii").split() for ln in lines[1:8]]
        keys = [h[0] for h in head]
        if keys != ["width", "height", "spacing", "units", "min", "max", "checksum"]:
            raise FormatError(f"unexpected header keys {keys}")
        W, H = int(head[0][1]), int(head[1][1])
        spacing, ox, oy = (float(x) for x in head[2][1:4])
        units = head[3][1]
        crc = int(head[6][1], 16)
    except (IndexError, ValueError, UnicodeDecodeError) as e:
        raise FormatError(f"malformed grid header: {e}") from None
    payload = lines[8]
    nch = 2 if units == "vector2" else 1
    if len(payload) != 4 * W * H * nch:
        raise FormatError(f"payload has {len(payload)} bytes, expected {4 * W * H * nch}")
    if zlib.crc32(payload) != crc:
        raise FormatError("checksum mismatch")
    v = np.frombuffer(payload, dtype="<f4").astype(float)
    v = v.reshape((H, W, 2) if nch == 2 else (H, W))
    return v, dict(width=W, height=H, spacing=spacing, origin=(ox, oy), units=units)


def read_grid(path) -> ScalarGrid:
    v, h = parse_grid(Path(path).read_bytes())
    if v.ndim != 2:
        raise FormatError("expected a scalar grid, found a vector grid")
    return ScalarGrid(v, h["spacing"], h["origin"], units=h["units"], meta={"source": str(path)})


# ---------------------------------------------------------------------------
# complex JSON


def _num(x):
    """JSON number; non-finite values become null."""
    x = float(x)
    return x if math.isfinite(x) else None


def _pts(P) -> list:
    return [[float(a), float(b)] for a, b in np.asarray(P, float)]


def complex_to_dict(c: MSComplex, contours=None, thresholds=None) -> dict:
    """Plain-data view of a complex (and optionally its scored contours)."""
    prov = {k: v for k, v in sorted(c.provenance.items()) if isinstance(v, (str, int, float, bool))}
    d = {
        "format": COMPLEX_FORMAT,
        "shape": list(c.shape),
        "provenance": prov,
        "counts": c.counts(),
        "nodes": [{"id": p.id, "index": p.index,
                   "position": None if p.position is None else [float(p.position[0]), float(p.position[1])],
                   "value": _num(p.value), "persistence": _num(p.persistence),
                   "boundary": p.boundary, "virtual": p.virtual, "cell": int(p.cell)}
                  for p in c.critical_points],
        "arcs": [{"id": a.id, "origin": a.origin, "destination": a.destination, "kind": a.kind,
                  "cells": [int(x) for x in a.cells], "values": [_num(x) for x in a.values],
                  "polyline": _pts(a.polyline)}
                 for a in c.separatrices],
        "faces": [{"id": f.id, "min": f.min, "max": f.max, "saddles": list(f.saddles),
                   "arcs": list(f.arcs), "area": float(f.area)}
                  for f in c.cells2],
        "pairs": [{"saddle": p.saddle, "extremum": p.extremum, "persistence": float(p.persistence)}
                  for p in c.pairs],
    }
    if contours is not None:
        K, M = thresholds if thresholds is not None else (None, None)
        d["thresholds"] = {"K": _num(K) if K is not None else None,
                           "M": _num(M) if M is not None else None}
        d["contours"] = [{"id": cc.id, "arcs": list(cc.arcs), "saddle": cc.saddle,
                          "extremum": cc.extremum, "kind": cc.kind, "closed": cc.closed,
                          "K_achieved": float(cc.K_achieved), "M_achieved": float(cc.M_achieved),
                          "admitted": bool(K is not None and cc.admitted(K, M)),
                          "polyline": _pts(cc.polyline)}
                         for cc in contours]
    return d


def dumps(obj) -> str:
    """Deterministic compact JSON (shortest round-trip floats, no NaN)."""
    return json.dumps(obj, separators=(",", ":"), allow_nan=False) + "\n"


def complex_from_dict(d: dict) -> MSComplex:
    if d.get("format") != COMPLEX_FORMAT:
        raise FormatError("not a complex document")
    inf = math.inf
    pts = [CriticalPoint(n["id"], n["cell"], n["index"],
                         None if n["position"] is None else tuple(n["position"]),
                         -inf if n["value"] is None else n["value"],
                         inf if n["persistence"] is None else n["persistence"],
                         n["boundary"], n["virtual"])
           for n in d["nodes"]]
    arcs = [Separatrix(a["id"], a["origin"], a["destination"], a["kind"],
                       np.array(a["cells"], dtype=np.int64),
                       np.array(a["polyline"], float).reshape(-1, 2),
                       np.array([-inf if x is None else x for x in a["values"]], float))
            for a in d["arcs"]]
    faces = [TwoCell(f["id"], f["min"], f["max"], tuple(f["saddles"]), tuple(f["arcs"]), f["area"])
             for f in d["faces"]]
    pairs = [PersistencePair(p["saddle"], p["extremum"], p["persistence"]) for p in d["pairs"]]
    prov = dict(d.get("provenance", {}), shape=tuple(d["shape"]))
    return MSComplex(None, prov, critical_points=pts, separatrices=arcs, cells2=faces, pairs=pairs)


def write_complex(path, c: MSComplex, contours=None, thresholds=None) -> Path:
    return atomic_write(path, dumps(complex_to_dict(c, contours, thresholds)))


def read_complex(path) -> MSComplex:
    try:
        return complex_from_dict(json.loads(Path(path).read_text()))
    except (KeyError, TypeError, json.JSONDecodeError) as e:
        raise FormatError(f"malformed complex file: {e}") from None


# ---------------------------------------------------------------------------
# run configuration

AUTO = "auto"


@dataclass
class RunConfig:
    """Parsed run configuration.

    ``surface`` and each entry of ``renders`` are flat string dicts taken
    straight from their sections; ``sections`` keeps every other section
    for the subcommands that need one.
    """

    surface: dict
    renders: list  # [(name, dict)]
    resolution: int = 256
    K: float | None = None
    M: float | None = None
    tau: float = 0.05
    delta: float = 3.0
    eps_grad: float | None = None
    delta_H: float | None = None
    out: str = "out"
    seed: int = 0
    threads: int = 1
    svg: bool = True
    base: Path = Path(".")
    sections: dict = field(default_factory=dict)
    text: str = ""

    def __post_init__(self):
        if self.resolution < 64:
            raise FormatError("resolution must be at least 64")
        for name in ("K", "M", "eps_grad", "delta_H"):
            v = getattr(self, name)
            if v is not None and not v > 0:
                raise FormatError(f"threshold {name} must be positive")
        if not self.tau > 0 or not self.delta > 0:
            raise FormatError("thresholds tau and delta must be positive")
        if self.threads < 1:
            raise FormatError("threads must be >= 1")

    def path(self, p) -> Path:
        p = Path(p)
        return p if p.is_absolute() else self.base / p

    def digest(self) -> str:
        return f"{zlib.crc32(self.text.encode()):08x}"


def _opt_float(s: str | None):
    if s is None or s.strip().lower() == AUTO:
        return None
    return float(s)


def parse_config(text: str, base=".") -> RunConfig:
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    cp.optionxform = str  # keep key case (K, M, L)
    try:
        cp.read_string(text)
    except configparser.Error as e:
        raise FormatError(f"config: {e}") from None
    sec = {s: dict(cp[s]) for s in cp.sections()}
    run = sec.pop("run", {})
    thr = sec.pop("thresholds", {})
    surface = sec.pop("surface", None)
    renders = [(s.split(".", 1)[1], sec.pop(s)) for s in list(sec) if s.startswith("render.")]
    try:
        return RunConfig(
            surface=surface or {},
            renders=renders,
            resolution=int(run.get("resolution", 256)),
            K=_opt_float(thr.get("K")), M=_opt_float(thr.get("M")),
            tau=float(thr.get("tau", 0.05)), delta=float(thr.get("delta", 3.0)),
            eps_grad=_opt_float(thr.get("eps_grad")), delta_H=_opt_float(thr.get("delta_H")),
            out=run.get("out", "out"), seed=int(run.get("seed", 0)),
            threads=int(run.get("threads", 1)),
            svg=run.get("svg", "yes").strip().lower() in ("yes", "true", "1", "on"),
            base=Path(base), sections=sec, text=text)
    except ValueError as e:
        if isinstance(e, FormatError):
            raise
        raise FormatError(f"config: {e}") from None


def read_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as e:
        raise FormatError(f"cannot read config {path}: {e.strerror}") from None
    return parse_config(text, path.parent)


def floats(s: str, n: int | None = None, what: str = "value") -> tuple[float, ...]:
    """Parse a whitespace or comma separated list of numbers."""
    try:
        v = tuple(float(x) for x in s.replace(",", " ").split())
    except ValueError:
        raise FormatError(f"{what}: expected numbers, got {s!r}") from None
    if n is not None and len(v) != n:
        raise FormatError(f"{what}: expected {n} numbers, got {len(v)}")
    return v


def require(d: dict, key: str, section: str) -> str:
    if key not in d:
        raise FormatError(f"[{section}] is missing {key!r}")
    return d[key]


__all__ = ["FormatError", "ParameterError", "RunConfig", "atomic_write", "complex_from_dict",
           "complex_to_dict", "dumps", "floats", "grid_bytes", "parse_config", "parse_grid",
           "read_complex", "read_config", "read_grid", "require", "write_complex", "write_grid",
           "write_vector_grid"]
