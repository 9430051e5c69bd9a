"""Static SVG figures: isophotes, flow needles, complexes and contour overlays.

Coordinates are pixel ``(x, y)`` with ``y`` down, written at fixed
precision so identical inputs give identical bytes.  Complex markers:
maxima solid discs, minima hollow circles, saddles crosses; saddle-max
arcs white, saddle-min arcs blue, admitted contours orange.
"""

from __future__ import annotations

import numpy as np
from skimage import measure

N_LEVELS = 12
PALETTE = ("#e6194b", "#3cb44b", "#4363d8", "#f58231", "#911eb4", "#42d4f4",
           "#f032e6", "#bfef45", "#9a6324", "#469990", "#800000", "#000075")


def _f(x: float) -> str:
    s = f"{x:.2f}".rstrip("0").rstrip(".")
    return "0" if s in ("-0", "") else s


def _path(P, closed=False) -> str:
    P = np.asarray(P, float)
    if len(P) == 0:
        return ""
    d = "M" + " L".join(f"{_f(x)},{_f(y)}" for x, y in P)
    return d + (" Z" if closed else "")


class Figure:
    """Minimal SVG builder with one ``<g>`` per layer."""

    def __init__(self, width: int, height: int, scale: float = 2.0, background: str = "#303030"):
        self.width, self.height, self.scale = width, height, scale
        self.layers: list[tuple[str, list[str]]] = []
        self.background = background

    def layer(self, name: str) -> list[str]:
        items: list[str] = []
        self.layers.append((name, items))
        return items

    def render(self) -> str:
        W, H, s = self.width, self.height, self.scale
        out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{_f(W * s)}" height="{_f(H * s)}" '
               f'viewBox="-0.5 -0.5 {W} {H}">',
               f'<rect x="-0.5" y="-0.5" width="{W}" height="{H}" fill="{self.background}"/>']
        for name, items in self.layers:
            out.append(f'<g id="{name}">')
            out.extend(items)
            out.append("</g>")
        out.append("</svg>")
        return "\n".join(out) + "\n"


def isophote_levels(values: np.ndarray, n: int = N_LEVELS) -> np.ndarray:
    lo, hi = float(np.min(values)), float(np.max(values))
    return lo + (hi - lo) * (np.arange(1, n + 1) / (n + 1))


def add_isophotes(fig: Figure, values: np.ndarray, n: int = N_LEVELS) -> None:
    g = fig.layer("isophotes")
    v = np.asarray(values, float)
    if np.ptp(v) == 0:
        return
    for k, lev in enumerate(isophote_levels(v, n)):
        grey = int(90 + 150 * (k + 1) / (n + 1))
        col = f"#{grey:02x}{grey:02x}{grey:02x}"
        for C in measure.find_contours(v, lev):
            g.append(f'<path d="{_path(C[:, ::-1])}" fill="none" stroke="{col}" stroke-width="0.4"/>')


def add_needles(fig: Figure, direction: np.ndarray, mask=None, stride: int = 8,
                length: float = 0.8) -> None:
    """Undirected line segments along ``direction`` (``(H, W, 2)``) every ``stride`` pixels."""
    g = fig.layer("needles")
    D = np.asarray(direction, float)
    H, W = D.shape[:2]
    half = 0.5 * length * stride
    for r in range(stride // 2, H, stride):
        for c in range(stride // 2, W, stride):
            if mask is not None and not mask[r, c]:
                continue
            dx, dy = D[r, c]
            if not np.isfinite(dx) or dx == dy == 0:
                continue
            g.append(f'<line x1="{_f(c - half * dx)}" y1="{_f(r - half * dy)}" '
                     f'x2="{_f(c + half * dx)}" y2="{_f(r + half * dy)}" '
                     'stroke="#9fd8ff" stroke-width="0.6"/>')


def add_complex(fig: Figure, c, marker: float = 1.6) -> None:
    arcs = fig.layer("arcs")
    for a in c.separatrices:
        col = "#ffffff" if a.kind == "saddle-max" else "#5aa0ff"
        arcs.append(f'<path d="{_path(a.polyline)}" fill="none" stroke="{col}" stroke-width="0.6"/>')
    pts = fig.layer("critical-points")
    m = marker
    for p in c.critical_points:
        if p.position is None:
            continue
        x, y = p.position
        if p.index == 2:
            pts.append(f'<circle cx="{_f(x)}" cy="{_f(y)}" r="{_f(m)}" fill="#ffdd00"/>')
        elif p.index == 0:
            pts.append(f'<circle cx="{_f(x)}" cy="{_f(y)}" r="{_f(m)}" fill="none" '
                       'stroke="#ffdd00" stroke-width="0.6"/>')
        else:
            pts.append(f'<path d="M{_f(x - m)},{_f(y - m)} L{_f(x + m)},{_f(y + m)} '
                       f'M{_f(x - m)},{_f(y + m)} L{_f(x + m)},{_f(y - m)}" '
                       'stroke="#ffdd00" stroke-width="0.6"/>')


def add_contours(fig: Figure, contours, color: str = "#ff8c00", width: float = 1.4,
                 name: str = "contours") -> None:
    g = fig.layer(name)
    for cc in contours:
        g.append(f'<path d="{_path(cc.polyline, cc.closed)}" fill="none" stroke="{color}" '
                 f'stroke-width="{_f(width)}" data-id="{cc.id}"/>')


def add_polylines(fig: Figure, polylines, color: str, closed=False, width: float = 1.0,
                  name: str = "polylines", dash: str | None = None) -> None:
    g = fig.layer(name)
    extra = f' stroke-dasharray="{dash}"' if dash else ""
    for P in polylines:
        g.append(f'<path d="{_path(P, closed)}" fill="none" stroke="{color}" '
                 f'stroke-width="{_f(width)}"{extra}/>')


def add_matches(fig: Figure, A, B, report) -> None:
    """Colour-code matched pairs (A solid, B dashed); unmatched curves grey."""
    ga = {cc.id: cc for cc in A}
    gb = {cc.id: cc for cc in B}
    g = fig.layer("matches")
    for k, p in enumerate(report.pairs):
        col = PALETTE[k % len(PALETTE)]
        a, b = ga[p.a], gb[p.b]
        g.append(f'<path d="{_path(a.polyline, a.closed)}" fill="none" stroke="{col}" stroke-width="1.6"/>')
        g.append(f'<path d="{_path(b.polyline, b.closed)}" fill="none" stroke="{col}" '
                 'stroke-width="1" stroke-dasharray="2,1.5"/>')
    for ids, src in ((report.unmatched_a, ga), (report.unmatched_b, gb)):
        for i in ids:
            cc = src[i]
            g.append(f'<path d="{_path(cc.polyline, cc.closed)}" fill="none" stroke="#888888" '
                     'stroke-width="0.8"/>')


def image_figure(values: np.ndarray, *, complex=None, contours=None, needles=None,
                 needle_mask=None, stride: int = 8) -> str:
    """Isophotes plus any overlays, as an SVG string."""
    v = np.asarray(values, float)
    fig = Figure(v.shape[1], v.shape[0])
    add_isophotes(fig, v)
    if needles is not None:
        add_needles(fig, needles, needle_mask, stride)
    if complex is not None:
        add_complex(fig, complex)
    if contours is not None:
        add_contours(fig, contours)
    return fig.render()
