"""Morse-Smale complex of a sampled scalar field via discrete Morse theory.

The discrete gradient is the lower-star gradient of the cubical complex of
the pixel grid, closed into a sphere by a virtual minimum below every value.
Ties are broken by a global total order (value, then row-major index).
Separatrices are V-paths traced from critical edges; persistence pairs
follow the elder rule on the resulting graph, and simplification cancels
pairs in increasing persistence by reversing gradient paths.
"""

from __future__ import annotations

import hashlib
import logging
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from ..surfacegen import ScalarGrid
from . import _kernels as K
from ._cells import CellComplex, cell_complex

log = logging.getLogger(__name__)

INDEX_NAMES = {0: "min", 1: "saddle", 2: "max"}


@dataclass(frozen=True, eq=False)
class CriticalPoint:
    id: int
    cell: int
    index: int
    position: tuple[float, float] | None  # (x, y) pixels; None for the virtual minimum
    value: float
    persistence: float = np.inf
    boundary: bool = False
    virtual: bool = False


@dataclass(frozen=True, eq=False)
class Separatrix:
    id: int
    origin: int  # saddle id
    destination: int  # extremum id
    kind: str  # "saddle-max" | "saddle-min"
    cells: np.ndarray
    polyline: np.ndarray  # (n, 2) pixel (x, y), virtual vertex dropped
    values: np.ndarray  # field value of each cell in ``cells`` (-inf for the virtual vertex)


@dataclass(frozen=True, eq=False)
class TwoCell:
    id: int
    min: int
    max: int
    saddles: tuple[int, ...]
    arcs: tuple[int, ...]  # cyclic order min -> saddle -> max -> saddle
    area: float  # pixels^2 inside the image domain


@dataclass(frozen=True, eq=False)
class PersistencePair:
    saddle: int  # critical point id in the owning complex
    extremum: int
    persistence: float


@dataclass(eq=False)
class _Gradient:
    topo: CellComplex
    pair: np.ndarray
    crit: np.ndarray
    cval: np.ndarray  # value per cell (max vertex), -inf for the virtual vertex
    vorder: np.ndarray  # total-order rank of each cell's max vertex
    key: np.ndarray
    pers: dict  # cell -> (persistence, tie-break)
    cell_pairs: list  # [(saddle cell, extremum cell, persistence, tiebreak)]

    def copy(self) -> "_Gradient":
        return _Gradient(self.topo, self.pair.copy(), self.crit.copy(), self.cval, self.vorder,
                         self.key, self.pers, self.cell_pairs)


class MSComplex:
    """Critical points, separatrices, 2-cells and persistence pairs of a field.

    Built complexes carry their discrete gradient; the geometric parts are
    assembled on first access and never change afterwards.
    """

    def __init__(self, field: ScalarGrid | None, provenance: dict, grad: "_Gradient | None" = None,
                 *, critical_points=None, separatrices=None, cells2=None, pairs=None):
        self.field = field
        self.provenance = provenance
        self._grad = grad
        for name, val in (("critical_points", critical_points), ("separatrices", separatrices),
                          ("cells2", cells2), ("pairs", pairs)):
            if val is not None:
                self.__dict__[name] = tuple(val)
        if grad is None and critical_points is None:
            raise ValueError("complex needs a gradient or explicit critical points")

    # ------------------------------------------------------------- assembly
    @cached_property
    def _crit_cells(self) -> np.ndarray:
        g = self._grad
        cells = np.flatnonzero(g.crit)
        rank = _filtration_rank(g, cells)
        return cells[np.lexsort((rank, g.topo.dim[cells]))]

    @cached_property
    def _cp_of_cell(self) -> dict:
        return {c: i for i, c in enumerate(self._crit_cells.tolist())}

    @cached_property
    def critical_points(self) -> tuple[CriticalPoint, ...]:
        g = self._grad
        T = g.topo
        out = []
        for pid, cell in enumerate(self._crit_cells.tolist()):
            virtual = cell == T.virt
            pos = None if virtual else (float(T.pos[cell, 0]), float(T.pos[cell, 1]))
            pers = g.pers.get(cell, (np.inf, 0))[0]
            out.append(CriticalPoint(pid, cell, int(T.dim[cell]), pos, float(g.cval[cell]), pers,
                                     bool(T.on_boundary[cell]), virtual))
        return tuple(out)

    @cached_property
    def separatrices(self) -> tuple[Separatrix, ...]:
        g = self._grad
        T = g.topo
        cp = self._cp_of_cell
        saddles = self._crit_cells[T.dim[self._crit_cells] == 1]
        cells, off = _trace_all(g, saddles)
        out = []
        for i, s in enumerate(saddles.tolist()):
            for k in range(4):
                path = cells[off[4 * i + k]:off[4 * i + k + 1]]
                poly = T.pos[path]
                poly = poly[np.isfinite(poly[:, 0])]
                kind = "saddle-min" if k < 2 else "saddle-max"
                out.append(Separatrix(len(out), cp[s], cp[int(path[-1])], kind, path, poly,
                                      g.cval[path]))
        return tuple(out)

    @cached_property
    def cells2(self) -> tuple[TwoCell, ...]:
        return tuple(_two_cells(self._grad, self._cp_of_cell, self.separatrices))

    @cached_property
    def pairs(self) -> tuple[PersistencePair, ...]:
        cp = self._cp_of_cell
        return tuple(PersistencePair(cp[s], cp[e], p)
                     for s, e, p, _ in self._grad.cell_pairs if s in cp and e in cp)

    # ----------------------------------------------------------------- queries
    def counts(self) -> dict[str, int]:
        if self._grad is not None:
            n = np.bincount(self._grad.topo.dim[self._grad.crit], minlength=3)
            return {"min": int(n[0]), "saddle": int(n[1]), "max": int(n[2])}
        c = {"min": 0, "saddle": 0, "max": 0}
        for p in self.critical_points:
            c[INDEX_NAMES[p.index]] += 1
        return c

    def euler(self) -> int:
        c = self.counts()
        return c["min"] - c["saddle"] + c["max"]

    def point(self, pid: int) -> CriticalPoint:
        return self.critical_points[pid]

    def arcs_of(self, pid: int) -> list[Separatrix]:
        return [a for a in self.separatrices if a.origin == pid or a.destination == pid]

    def interior_points(self, index: int | None = None) -> list[CriticalPoint]:
        return [p for p in self.critical_points
                if not p.boundary and (index is None or p.index == index)]

    @property
    def shape(self) -> tuple[int, int]:
        if self.field is not None:
            return self.field.values.shape
        return tuple(self.provenance.get("shape", (0, 0)))

    def finite_persistences(self) -> np.ndarray:
        return np.array([p.persistence for p in self.pairs])


# ---------------------------------------------------------------------------
# construction


def _grid_id(values: np.ndarray) -> str:
    return hashlib.sha1(np.ascontiguousarray(values, dtype="<f8").tobytes()).hexdigest()[:16]


def _initial_gradient(values: np.ndarray) -> _Gradient:
    H, W = values.shape
    T = cell_complex(H, W)
    N = T.n_cells
    flat = values.ravel()
    n = flat.size
    order = np.empty(n, np.int64)
    order[np.lexsort((np.arange(n), flat))] = np.arange(n)

    NC = 2 * W - 1
    r, c = np.divmod(np.arange(n), W)
    vcells = (2 * r) * NC + 2 * c
    vord = np.full(N + 1, -2, np.int64)  # slot N absorbs the -1 padding index
    vord[vcells] = order
    vord[T.virt] = -1
    vo = vord[np.where(T.verts >= 0, T.verts, N)]
    key = -np.sort(-vo, axis=1)
    maxv = T.verts[np.arange(N), np.argmax(vo, axis=1)]

    gidx = np.full(N + 1, -1, np.int64)
    gidx[vcells] = np.arange(n)
    cval = np.where(maxv == T.virt, -np.inf, flat[gidx[maxv]])
    vorder = vord[maxv]

    members = np.flatnonzero(maxv != T.virt)
    srt = members[np.argsort(maxv[members], kind="stable")]
    mv = maxv[srt]
    vlist, starts = np.unique(mv, return_index=True)
    star_ptr = np.append(starts, srt.size).astype(np.int64)

    pair = np.full(N, -1, np.int64)
    crit = np.zeros(N, np.bool_)
    K.process_lower_stars(vlist.astype(np.int64), star_ptr, srt.astype(np.int64), T.dim,
                          T.faces, maxv, key, pair, crit)
    crit[T.virt] = True
    return _Gradient(T, pair, crit, cval, vorder, key, {}, [])


def _trace_all(g: _Gradient, saddles: np.ndarray):
    T = g.topo
    return K.trace_all(np.asarray(saddles, np.int64), T.faces, T.cofaces, g.pair, g.crit)


def _filtration_rank(g: _Gradient, cells: np.ndarray) -> np.ndarray:
    k = g.key[cells]
    idx = np.lexsort(tuple(k[:, t] for t in range(k.shape[1] - 1, -1, -1)))
    rank = np.empty(len(cells), np.int64)
    rank[idx] = np.arange(len(cells))
    return rank


class _UF:
    def __init__(self):
        self.p = {}

    def find(self, a):
        p = self.p
        p.setdefault(a, a)
        root = a
        while p[root] != root:
            root = p[root]
        while p[a] != root:
            p[a], a = root, p[a]
        return root


def _elder_pairs(g: _Gradient) -> None:
    """Persistence pairs by the elder rule (sublevel minima, superlevel maxima)."""
    crit_cells = np.flatnonzero(g.crit)
    rank = dict(zip(crit_cells.tolist(), _filtration_rank(g, crit_cells).tolist()))
    sad = crit_cells[g.topo.dim[crit_cells] == 1]
    cells, off = _trace_all(g, sad)
    dest = cells[off[1:] - 1].reshape(-1, 4).tolist()
    down = {s: d[:2] for s, d in zip(sad.tolist(), dest)}
    up = {s: d[2:] for s, d in zip(sad.tolist(), dest)}
    saddles = sorted(down, key=rank.__getitem__)
    uf = _UF()
    positive = []
    pairs = []
    for s in saddles:
        a, b = (uf.find(m) for m in down[s])
        if a == b:
            positive.append(s)
            continue
        young, old = (a, b) if rank[a] > rank[b] else (b, a)
        uf.p[young] = old
        pairs.append((s, young))
    uf = _UF()
    for s in reversed(positive):
        a, b = (uf.find(m) for m in up[s])
        if a == b:
            log.warning("saddle %d closes no component on either side", s)
            continue
        young, old = (a, b) if rank[a] < rank[b] else (b, a)
        uf.p[young] = old
        pairs.append((s, young))
    out = []
    for s, e in pairs:
        p = abs(float(g.cval[s]) - float(g.cval[e]))
        tb = abs(int(g.vorder[s]) - int(g.vorder[e]))
        out.append((int(s), int(e), p, tb))
        g.pers[int(s)] = (p, tb)
        g.pers[int(e)] = (p, tb)
    out.sort(key=lambda t: (t[2], t[3]))
    g.cell_pairs = out


def _two_cells(g: _Gradient, cp_of_cell: dict, arcs_list: list) -> list[TwoCell]:
    T = g.topo
    H, W = T.H, T.W
    NC = 2 * W - 1
    lab = np.full(T.n_cells, -1, np.int64)
    for cell, pid in cp_of_cell.items():
        lab[cell] = pid
    r, c = np.divmod(np.arange(H * W), W)
    vl = K.descend_labels(((2 * r) * NC + 2 * c).astype(np.int64), T.faces, g.pair, g.crit,
                          lab).reshape(H, W)
    r, c = np.divmod(np.arange((H - 1) * (W - 1)), W - 1)
    sl = K.ascend_labels(((2 * r + 1) * NC + 2 * c + 1).astype(np.int64), T.cofaces, g.pair,
                         g.crit, lab).reshape(H - 1, W - 1)
    QH, QW = 2 * (H - 1), 2 * (W - 1)
    qmax = np.repeat(np.repeat(sl, 2, 0), 2, 1)
    qi = (np.arange(QH) + 1) // 2
    qj = (np.arange(QW) + 1) // 2
    qmin = vl[qi[:, None], qj[None, :]]
    ncp = len(cp_of_cell) + 1
    comb = qmax * ncp + qmin
    ids = np.arange(QH * QW).reshape(QH, QW)
    e1 = comb[:, 1:] == comb[:, :-1]
    e2 = comb[1:, :] == comb[:-1, :]
    src = np.concatenate([ids[:, :-1][e1], ids[:-1, :][e2]])
    dst = np.concatenate([ids[:, 1:][e1], ids[1:, :][e2]])
    graph = coo_matrix((np.ones(src.size), (src, dst)), shape=(QH * QW, QH * QW))
    ncomp, comp = connected_components(graph, directed=False)
    comp = comp.reshape(QH, QW)
    # components sharing labels and touching the rim are joined through the cone
    rim = np.zeros((QH, QW), bool)
    rim[0, :] = rim[-1, :] = rim[:, 0] = rim[:, -1] = True
    canon = np.arange(ncomp)
    first_rim = {}
    for cid, lb in zip(comp[rim].tolist(), comb[rim].tolist()):
        root = first_rim.setdefault(lb, cid)
        canon[cid] = canon[root]
    comp = canon[comp]
    uniq, inv, area = np.unique(comp.ravel(), return_inverse=True, return_counts=True)
    comp = inv.reshape(QH, QW)
    cmax = np.zeros(uniq.size, np.int64)
    cmin = np.zeros(uniq.size, np.int64)
    cmax[comp.ravel()] = qmax.ravel()
    cmin[comp.ravel()] = qmin.ravel()

    by_saddle: dict[int, list[tuple[int, Separatrix]]] = {}
    for a in arcs_list:
        by_saddle.setdefault(a.origin, []).append(a)
    adj: dict[int, set[int]] = {}
    for cell, pid in cp_of_cell.items():
        if T.dim[cell] != 1:
            continue
        x, y = T.pos[cell]
        qs = set()
        for dy in (-1, 0):
            for dx in (-1, 0):
                a, b = int(round(2 * y)) + dy, int(round(2 * x)) + dx
                if 0 <= a < QH and 0 <= b < QW:
                    qs.add(int(comp[a, b]))
        for q in qs:
            adj.setdefault(q, set()).add(pid)
    out = []
    for k in range(uniq.size):
        M, m = int(cmax[k]), int(cmin[k])
        sads = []
        for s in sorted(adj.get(k, ())):
            arcs = by_saddle.get(s, [])
            if any(a.destination == m for a in arcs) and any(a.destination == M for a in arcs):
                sads.append(s)
        cyc = []
        if len(sads) == 1:
            s = sads[0]
            dm = [a.id for a in by_saddle[s] if a.destination == m]
            uM = [a.id for a in by_saddle[s] if a.destination == M]
            cyc = [dm[0], uM[0], uM[-1], dm[-1]]
        elif len(sads) >= 2:
            s1, s2 = sads[0], sads[1]
            pick = lambda s, d: next(a.id for a in by_saddle[s] if a.destination == d)  # noqa: E731
            cyc = [pick(s1, m), pick(s1, M), pick(s2, M), pick(s2, m)]
        out.append(TwoCell(k, m, M, tuple(sads), tuple(cyc), float(area[k]) / 4.0))
    return out


def build_complex(I: ScalarGrid) -> MSComplex:
    """Morse-Smale complex of ``I`` (unsimplified)."""
    vals = np.asarray(I.values, float)
    if vals.shape[0] < 8 or vals.shape[1] < 8:
        raise ValueError("grid must be at least 8x8")
    g = _initial_gradient(vals)
    _elder_pairs(g)
    prov = {"source": _grid_id(vals), "threshold": 0.0, "shape": list(vals.shape)}
    return MSComplex(I, prov, g)


# ---------------------------------------------------------------------------
# persistence


def persistence_pairs(c: MSComplex) -> list[tuple[CriticalPoint, CriticalPoint, float]]:
    """Saddle-extremum pairs of ``c`` in cancellation order (increasing persistence)."""
    return [(c.critical_points[p.saddle], c.critical_points[p.extremum], p.persistence)
            for p in c.pairs]


def _cancel(g: _Gradient, s: int, e: int) -> bool:
    T = g.topo
    if T.dim[e] == 0:
        paths = [K.trace_descending(s, side, T.faces, g.pair, g.crit) for side in (0, 1)]
    else:
        paths = [K.trace_ascending(s, side, T.cofaces, g.pair, g.crit) for side in (0, 1)]
    hits = [p for p in paths if p[-1] == e]
    if len(hits) != 1:
        return False
    K.reverse_path(hits[0], g.pair, g.crit)
    return True


def simplify(c: MSComplex, tau: float) -> MSComplex:
    """Cancel every persistence pair with persistence ``< tau`` (increasing order)."""
    if tau < 0:
        raise ValueError("tau must be non-negative")
    if c._grad is None:
        raise ValueError("complex carries no gradient (deserialized?)")
    todo = [(s, e) for s, e, p, _ in c._grad.cell_pairs
            if p < tau and c._grad.crit[s] and c._grad.crit[e]]
    if not todo:
        return c
    g = c._grad.copy()
    failed = 0
    for s, e in todo:
        if not _cancel(g, s, e):
            failed += 1
    if failed:
        log.warning("%d persistence pairs could not be cancelled", failed)
    prov = dict(c.provenance, threshold=float(max(tau, c.provenance.get("threshold", 0.0))),
                failed_cancellations=failed)
    return MSComplex(c.field, prov, g)


def simplify_fraction(c: MSComplex, fraction: float = 0.05) -> MSComplex:
    """Simplify at ``fraction`` of the field's value range."""
    v = c.field.values
    return simplify(c, fraction * float(v.max() - v.min()))


# ---------------------------------------------------------------------------
# gradient paths


def gradient_path(I, seed) -> np.ndarray:
    """Ascending V-path from the 2-cell under ``seed`` (pixel ``(x, y)``) to a maximum.

    Accepts a :class:`ScalarGrid` or an already-built :class:`MSComplex`.
    Returns an ``(n, 3)`` array of ``(x, y, value)`` per visited 2-cell.
    """
    c = I if isinstance(I, MSComplex) else build_complex(I)
    g = c._grad
    T = g.topo
    x = min(max(int(np.floor(seed[0])), 0), T.W - 2)
    y = min(max(int(np.floor(seed[1])), 0), T.H - 2)
    cell = T.square_cell(y, x)
    path = [cell]
    while not g.crit[cell]:
        e = g.pair[cell]
        a, b = T.cofaces[e]
        cell = b if a == cell else a
        path.append(cell)
    path = np.array(path)
    return np.column_stack([T.pos[path], g.cval[path]])


# ---------------------------------------------------------------------------
# comparison


def ms_graph(c: MSComplex, include_boundary: bool = True):
    """Critical points and arcs as a networkx multigraph (node attr ``index``)."""
    import networkx as nx

    G = nx.MultiGraph()
    for p in c.critical_points:
        if include_boundary or not p.boundary:
            G.add_node(p.id, index=p.index)
    for a in c.separatrices:
        if a.origin in G and a.destination in G:
            G.add_edge(a.origin, a.destination)
    return G


def combinatorially_equal(a: MSComplex, b: MSComplex) -> bool:
    """Isomorphism of the MS graphs respecting critical-point index."""
    import networkx as nx
    from networkx.algorithms.isomorphism import MultiGraphMatcher

    if a.counts() != b.counts() or len(a.separatrices) != len(b.separatrices):
        return False
    ga, gb = ms_graph(a), ms_graph(b)
    return MultiGraphMatcher(ga, gb, node_match=lambda x, y: x["index"] == y["index"]).is_isomorphic() \
        if nx.faster_could_be_isomorphic(ga, gb) else False
