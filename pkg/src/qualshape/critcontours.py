"""K-critical contours: separatrices with high transverse walls and flat tangential profile.

A candidate curve is either a single separatrix or a closed loop of
same-kind arcs (two arcs joining one saddle to one extremum, or a ring
alternating between saddles and extrema).  Along each candidate
a curve frame ``u`` (tangent) / ``w`` (normal) is built by central
differences, image derivatives are interpolated from central-difference
grids, and the curve is scored by

* ``K_achieved``: the smallest of ``|I_ww|`` over all vertices and, for open
  curves, ``|I_uu|`` one vertex inside each end;
* ``M_achieved``: the largest of ``|grad I| * scale`` and ``|I_uw|``.

A curve is admitted under thresholds ``(K, M)`` iff ``K_achieved > K`` and
``M_achieved < M``.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import networkx as nx
import numpy as np
from scipy.spatial import cKDTree

from . import imagecalc
from .morse import MSComplex, build_complex, simplify
from .renderer import BlurSequence, blur_contour
from .surfacegen import GridSpec, ParameterError, ScalarGrid

TANGENT_STRIDE = 3
MAX_CYCLE_ARCS = 8
K_PERCENTILE = 60.0
# K_achieved is a minimum along a curve while the percentile pools vertices
# of all curves, so a dominant contour sits below its own 60th percentile.
# The default K is relaxed by this factor.
K_FACTOR = 0.3
M_FACTOR = 3.0


@dataclass(frozen=True, eq=False)
class CriticalContour:
    id: int
    arcs: tuple[int, ...]  # separatrix ids (one for an open curve, all arcs of a loop)
    saddle: int
    extremum: int
    kind: str
    polyline: np.ndarray  # (n, 2) pixel (x, y)
    u: np.ndarray  # (n, 2) unit tangent
    w: np.ndarray  # (n, 2) unit normal
    K_achieved: float
    M_achieved: float
    closed: bool
    I_ww: np.ndarray = field(repr=False, default=None)
    I_uw: np.ndarray = field(repr=False, default=None)
    grad: np.ndarray = field(repr=False, default=None)
    nodes: tuple = ()  # critical points along the curve (saddle, extremum for open arcs)

    @property
    def length(self) -> float:
        P = self.polyline
        return float(np.sum(np.hypot(*np.diff(P, axis=0).T)))

    def admitted(self, K: float, M: float) -> bool:
        return self.K_achieved > K and self.M_achieved < M


def _dedupe(P: np.ndarray) -> np.ndarray:
    keep = np.ones(len(P), bool)
    keep[1:] = np.any(np.diff(P, axis=0) != 0, axis=1)
    return P[keep]


def curve_frame(P: np.ndarray, closed: bool, stride: int = TANGENT_STRIDE):
    """Central-difference tangent ``u`` and normal ``w = rot90(u)`` per vertex."""
    n = len(P)
    idx = np.arange(n)
    if closed:
        a = P[(idx + stride) % n] - P[(idx - stride) % n]
    else:
        a = P[np.minimum(idx + stride, n - 1)] - P[np.maximum(idx - stride, 0)]
    nrm = np.hypot(a[:, 0], a[:, 1])
    nrm[nrm == 0] = 1.0
    u = a / nrm[:, None]
    return u, imagecalc.rot90(u)


@dataclass(frozen=True, eq=False)
class _Fields:
    grad: np.ndarray
    hess: np.ndarray
    spacing: float


def _fields(I: ScalarGrid, sigma_pre: float = 0.0) -> _Fields:
    return _Fields(imagecalc.gradient(I, sigma_pre), imagecalc.hessian(I, sigma_pre), I.spacing)


def _orient(arc, start) -> np.ndarray:
    return arc.polyline if arc.origin == start else arc.polyline[::-1]


def candidate_curves(c: MSComplex, max_cycle: int = MAX_CYCLE_ARCS) -> list[dict]:
    """Open separatrices plus closed loops of same-kind arcs.

    A loop is a simple cycle of saddle-max (or saddle-min) arcs that avoids
    the virtual minimum: two arcs from one saddle to one extremum, or a ring
    alternating between several saddles and extrema (at most ``max_cycle``
    arcs).  Arcs lying on a loop are not offered on their own.
    """
    cps = c.critical_points
    arcs = c.separatrices
    out, used = [], set()
    for kind in ("saddle-max", "saddle-min"):
        real = [a for a in arcs if a.kind == kind and not cps[a.destination].virtual]
        G = nx.Graph()
        for a in sorted(real, key=lambda a: (len(a.polyline), a.id)):
            key = (a.origin, a.destination)
            if G.has_edge(*key):
                b = arcs[G.edges[key]["arc"]]
                P = np.vstack([b.polyline, a.polyline[::-1][1:-1]])
                out.append(dict(arcs=tuple(sorted((a.id, b.id))), saddle=a.origin,
                                extremum=a.destination, kind=kind, polyline=_dedupe(P),
                                closed=True, nodes=(a.origin, a.destination)))
                used.update((a.id, b.id))
            else:
                G.add_edge(*key, arc=a.id)
        for cyc in nx.simple_cycles(G, length_bound=max_cycle):
            if len(cyc) < 4:
                continue
            # rotate so the cycle starts at its smallest saddle id
            sad = [n for n in cyc if cps[n].index == 1]
            k = cyc.index(min(sad))
            cyc = cyc[k:] + cyc[:k]
            if cyc[1] > cyc[-1]:
                cyc = [cyc[0]] + cyc[1:][::-1]
            parts, ids = [], []
            for u_, v_ in zip(cyc, cyc[1:] + cyc[:1]):
                a = arcs[G.edges[u_, v_]["arc"]]
                parts.append(_orient(a, u_)[:-1])
                ids.append(a.id)
            used.update(ids)
            ext = [n for n in cyc if cps[n].index != 1]
            out.append(dict(arcs=tuple(ids), saddle=cyc[0], extremum=min(ext), kind=kind,
                            polyline=_dedupe(np.vstack(parts)), closed=True, nodes=tuple(cyc)))
    for a in arcs:
        if a.id not in used:
            out.append(dict(arcs=(a.id,), saddle=a.origin, extremum=a.destination, kind=a.kind,
                            polyline=_dedupe(a.polyline), closed=False,
                            nodes=(a.origin, a.destination)))
    out.sort(key=lambda d: d["arcs"])
    return out


def _score(cand: dict, F: _Fields, scale: float, stride: int) -> CriticalContour | None:
    P = cand["polyline"]
    if len(P) < 3:
        return None
    closed = cand["closed"]
    u, w = curve_frame(P, closed, stride)
    Hs = imagecalc.bilinear(F.hess, P)
    gs = imagecalc.bilinear(F.grad, P)
    I_ww = np.abs(imagecalc.directional(Hs, w, w))
    I_uw = np.abs(imagecalc.directional(Hs, u, w))
    gm = np.hypot(gs[:, 0], gs[:, 1])
    K = float(I_ww.min())
    if not closed:
        I_uu = np.abs(imagecalc.directional(Hs, u, u))
        K = min(K, float(I_uu[1]), float(I_uu[-2]))
    M = float(max((gm * scale).max(), I_uw.max()))
    return CriticalContour(-1, cand["arcs"], cand["saddle"], cand["extremum"], cand["kind"], P,
                           u, w, K, M, closed, I_ww, I_uw, gm, cand["nodes"])


def score_candidates(I: ScalarGrid, c: MSComplex, *, scale: float = 1.0,
                     stride: int = TANGENT_STRIDE, sigma_pre: float = 0.0) -> list[CriticalContour]:
    """Every candidate curve with its achieved ``K`` and ``M`` (ids in candidate order)."""
    F = _fields(I, sigma_pre)
    out = []
    for cand in candidate_curves(c):
        cc = _score(cand, F, scale, stride)
        if cc is not None:
            out.append(replace(cc, id=len(out)))
    return out


def default_thresholds(I: ScalarGrid, c: MSComplex, *, stride: int = TANGENT_STRIDE,
                       eps_grad: float | None = None) -> tuple[float, float]:
    """Data-driven ``(K, M)``.

    Both statistics skip flat pixels where the flow frame is undefined
    (``|grad I| < eps_grad``), so that a mostly empty background does not
    drive them to zero.  ``K`` is ``K_FACTOR`` times the 60th percentile of
    ``|I_ww|`` over the remaining separatrix vertices; ``M`` is three times
    the median of ``|grad I|`` over the remaining pixels.
    """
    F = _fields(I)
    fr = imagecalc.shading_flow(I, eps_grad)
    vals = []
    for cand in candidate_curves(c):
        P = cand["polyline"]
        if len(P) < 3:
            continue
        _, w = curve_frame(P, cand["closed"], stride)
        iww = np.abs(imagecalc.directional(imagecalc.bilinear(F.hess, P), w, w))
        gm = np.hypot(*imagecalc.bilinear(F.grad, P).T)
        vals.append(iww[gm >= fr.eps])
    vals = np.concatenate(vals) if vals else np.empty(0)
    K = K_FACTOR * float(np.percentile(vals, K_PERCENTILE)) if vals.size else 0.0
    mag = fr.mag[fr.mask]
    M = M_FACTOR * float(np.median(mag)) if mag.size else 0.0
    return K, M


def detect(I: ScalarGrid, c: MSComplex, K: float | None = None, M: float | None = None, *,
           scale: float = 1.0, stride: int = TANGENT_STRIDE,
           candidates: list[CriticalContour] | None = None) -> list[CriticalContour]:
    """Admitted critical contours of ``I`` among the curves of ``c``."""
    if K is None or M is None:
        K0, M0 = default_thresholds(I, c, stride=stride)
        K = K0 if K is None else K
        M = M0 if M is None else M
    if not K > 0 or not M > 0:
        raise ParameterError("thresholds K and M must be positive")
    cands = score_candidates(I, c, scale=scale, stride=stride) if candidates is None else candidates
    return [cc for cc in cands if cc.admitted(K, M)]


def k_sweep(I: ScalarGrid, c: MSComplex, M: float, Ks=None, **kw):
    """Admitted count as a function of ``K`` at fixed ``M``.

    Returns ``(Ks, counts, achieved)`` where ``achieved`` maps each curve
    passing the ``M`` bound to its ``K_achieved`` (the supremum of admitting
    ``K``).
    """
    cands = score_candidates(I, c, **kw)
    ok = [cc for cc in cands if cc.M_achieved < M]
    ach = {cc.id: cc.K_achieved for cc in ok}
    if Ks is None:
        top = max(ach.values(), default=1.0)
        Ks = np.concatenate([[0.0], np.geomspace(top * 1e-4, top * 2, 64)])
    Ks = np.asarray(Ks, float)
    counts = np.array([sum(v > k for v in ach.values()) for k in Ks])
    return Ks, counts, ach


# ---------------------------------------------------------------------------
# distances


def densify(P: np.ndarray, step: float = 0.25, closed: bool = False) -> np.ndarray:
    P = np.asarray(P, float)
    if closed:
        P = np.vstack([P, P[:1]])
    out = [P[:1]]
    for a, b in zip(P[:-1], P[1:]):
        L = float(np.hypot(*(b - a)))
        k = max(1, int(np.ceil(L / step)))
        t = (np.arange(1, k + 1) / k)[:, None]
        out.append(a + t * (b - a))
    return np.vstack(out)


def directed_distances(A: np.ndarray, B: np.ndarray, step: float = 0.25,
                       closed_B: bool = False) -> np.ndarray:
    """Distance from each vertex of ``A`` to the polyline ``B`` (densified)."""
    tree = cKDTree(densify(B, step, closed_B))
    d, _ = tree.query(np.asarray(A, float))
    return d


def hausdorff(A, B, closed_A=False, closed_B=False, step: float = 0.25) -> float:
    a = densify(A, step, closed_A)
    b = densify(B, step, closed_B)
    return float(max(directed_distances(a, b, step, closed_B).max(),
                     directed_distances(b, a, step, closed_A).max()))


# ---------------------------------------------------------------------------
# concentration experiment


@dataclass(frozen=True)
class ConvergenceRow:
    sigma: float
    hausdorff: float | None
    mean_distance: float | None
    K_achieved: float | None
    M_achieved: float | None
    n_admitted: int
    closed: bool | None

# Samples per smallest sigma on the automatic canvas.
SAMPLES_PER_SIGMA = 4.0


def experiment_canvas(seq: BlurSequence) -> GridSpec:
    """Canvas covering the contour plus a 3-sigma margin, fine enough for the smallest sigma."""
    h = min(1.0, min(seq.sigmas) / SAMPLES_PER_SIGMA)
    P = seq.polyline
    pad = 3 * max(seq.sigmas) + 4
    return GridSpec(int(np.ceil((P[:, 0].max() + pad) / h)) + 1,
                    int(np.ceil((P[:, 1].max() + pad) / h)) + 1, spacing=h)


def _closest_contour(contours, alpha, grid: GridSpec, closed_alpha: bool):
    """Admitted contour with the smallest symmetric mean distance to ``alpha`` (world units)."""
    best = None
    for cc in contours:
        P = grid.to_world(cc.polyline)
        d = 0.5 * (directed_distances(P, alpha, closed_B=closed_alpha).mean()
                   + directed_distances(densify(alpha, 0.25, closed_alpha), P, closed_B=cc.closed).mean())
        if best is None or d < best[0]:
            best = (float(d), cc, P)
    return best


def convergence_experiment(seq: BlurSequence, K: float | None = None, M: float | None = None,
                           canvas: GridSpec | None = None, *, tau_fraction: float = 0.05,
                           stride: int = TANGENT_STRIDE) -> list[ConvergenceRow]:
    """Blur, build, simplify, detect and compare to the base contour for each sigma.

    Distances are in world units.  Thresholds left as ``None`` follow
    :func:`default_thresholds` at each sigma.  A sigma at which nothing is
    admitted yields a row with missing distances.
    """
    if seq.length <= 0:
        raise ParameterError("degenerate contour")
    if canvas is None:
        canvas = experiment_canvas(seq)
    rows = []
    alpha = seq.polyline
    for sigma in seq.sigmas:
        I = blur_contour(seq, sigma, canvas)
        v = I.values
        c = simplify(build_complex(I), tau_fraction * float(v.max() - v.min()))
        cands = score_candidates(I, c, stride=stride)
        K0, M0 = default_thresholds(I, c, stride=stride)
        k = K0 if K is None else K
        m = M0 if M is None else M
        adm = [cc for cc in cands if cc.admitted(k, m)]
        hit = _closest_contour(adm, alpha, canvas, seq.closed)
        if hit is None:
            rows.append(ConvergenceRow(sigma, None, None, None, None, 0, None))
            continue
        d, cc, P = hit
        rows.append(ConvergenceRow(sigma, hausdorff(P, alpha, cc.closed, seq.closed), d,
                                   cc.K_achieved, cc.M_achieved, len(adm), cc.closed))
    return rows
