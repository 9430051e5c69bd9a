"""Cross-rendering comparison of critical contours, slant alignment, bump
templates and Laplace interpolation from a contour scaffold.

A :class:`ContourSet` bundles admitted contours with the complex and grid
they came from.  Matching works in pixel units on a shared lattice: a pair
``(a, b)`` is a candidate when at least ``TUBE_FRACTION`` of the vertices of
each curve lie within ``delta`` of the other curve, and candidates are
assigned one-to-one greedily by symmetric mean distance.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import networkx as nx
import numpy as np
from networkx.algorithms.isomorphism import MultiGraphMatcher
from scipy import sparse
from scipy.sparse.linalg import spsolve
from skimage.measure import points_in_poly

from . import critcontours as cc_mod
from .critcontours import CriticalContour, densify, directed_distances
from .morse import MSComplex, build_complex, simplify
from .renderer import render
from .surfacegen import GridSpec, ParameterError, ScalarGrid, normals, slant_field

TUBE_FRACTION = 0.9
DEFAULT_DELTA = 3.0
TAU_FRACTION = 0.05


@dataclass(frozen=True, eq=False)
class ContourSet:
    contours: list
    complex: MSComplex | None
    shape: tuple[int, int]
    name: str = ""

    @classmethod
    def from_image(cls, I: ScalarGrid, *, K=None, M=None, tau_fraction: float = TAU_FRACTION,
                   candidates: bool = False, name: str = "") -> "ContourSet":
        """Build, simplify at ``tau_fraction`` of the range and detect.

        With ``candidates=True`` every scored separatrix is kept instead of the
        admitted subset (used for the slant side of the alignment test).
        """
        v = I.values
        c = simplify(build_complex(I), tau_fraction * float(v.max() - v.min()))
        if candidates:
            cs = cc_mod.score_candidates(I, c)
        else:
            cs = cc_mod.detect(I, c, K, M)
        return cls(cs, c, v.shape, name)


@dataclass(frozen=True)
class MatchPair:
    a: int
    b: int
    mean_distance: float
    max_distance: float
    fraction: float


@dataclass(frozen=True)
class MatchReport:
    pairs: list
    unmatched_a: list
    unmatched_b: list
    graph_equivalent: bool
    delta: float
    meta: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"delta": self.delta,
                "graph_equivalent": self.graph_equivalent,
                "pairs": [[p.a, p.b, p.mean_distance, p.max_distance, p.fraction] for p in self.pairs],
                "unmatched_a": list(self.unmatched_a),
                "unmatched_b": list(self.unmatched_b)}

    def summary(self) -> str:
        lines = [f"delta={self.delta:g}px pairs={len(self.pairs)} "
                 f"unmatched A={list(self.unmatched_a)} B={list(self.unmatched_b)} "
                 f"graph_equivalent={self.graph_equivalent}"]
        for p in self.pairs:
            lines.append(f"  {p.a:3d} <-> {p.b:3d}  mean {p.mean_distance:.3f}  "
                         f"max {p.max_distance:.3f}  within {p.fraction:.2f}")
        return "\n".join(lines)


def _curve(cc) -> tuple[np.ndarray, bool]:
    if isinstance(cc, CriticalContour):
        return cc.polyline, cc.closed
    return np.asarray(cc, float), False


def _compare(Pa, ca, Pb, cb, delta):
    da = directed_distances(densify(Pa, 0.5, ca), Pb, closed_B=cb)
    db = directed_distances(densify(Pb, 0.5, cb), Pa, closed_B=ca)
    fa = float(np.mean(da <= delta))
    fb = float(np.mean(db <= delta))
    return fa, fb, 0.5 * (float(da.mean()) + float(db.mean())), float(max(da.max(), db.max()))


def contour_graph(contours) -> nx.MultiGraph:
    """Adjacency multigraph: nodes are incident critical points, edges contours.

    The critical points on a closed contour are identified into a single
    node carrying a self-loop, so a ring counts the same whether it passes
    through one saddle or several.  Node labels separate saddles, extrema
    and loop nodes; maxima and minima are identified because they swap
    between an image and its photographic negative (the slant image darkens
    where shading brightens).
    """
    parent: dict = {}

    def find(x):
        parent.setdefault(x, x)
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    cs = list(contours)
    for cc in cs:
        if cc.closed:
            nodes = cc.nodes or (cc.saddle, cc.extremum)
            r = find(nodes[0])
            for n in nodes[1:]:
                parent[find(n)] = r
    loops = {find(n) for cc in cs if cc.closed for n in (cc.nodes or (cc.saddle,))}
    G = nx.MultiGraph()

    def node(pid, role):
        r = find(pid)
        G.add_node(r, role="loop" if r in loops else role)
        return r

    for cc in cs:
        if cc.closed:
            r = node((cc.nodes or (cc.saddle,))[0], "loop")
            G.add_edge(r, r)
        else:
            G.add_edge(node(cc.saddle, "saddle"), node(cc.extremum, "extremum"))
    return G


def graphs_equivalent(A, B) -> bool:
    Ga, Gb = contour_graph(A), contour_graph(B)
    if Ga.number_of_nodes() != Gb.number_of_nodes() or Ga.number_of_edges() != Gb.number_of_edges():
        return False
    return MultiGraphMatcher(Ga, Gb, node_match=lambda x, y: x["role"] == y["role"]).is_isomorphic()


def _contours(X):
    return X.contours if isinstance(X, ContourSet) else list(X)


def _shape(X):
    return X.shape if isinstance(X, ContourSet) else None


def _match(A, B, delta, *, graph_on_matched_b=False) -> MatchReport:
    if not delta > 0:
        raise ParameterError("delta must be positive")
    sa, sb = _shape(A), _shape(B)
    if sa is not None and sb is not None and tuple(sa) != tuple(sb):
        raise ParameterError(f"domain mismatch: {sa} vs {sb}")
    ca, cb = _contours(A), _contours(B)
    cand = []
    for i, a in enumerate(ca):
        Pa, cla = _curve(a)
        for j, b in enumerate(cb):
            Pb, clb = _curve(b)
            fa, fb, mean, mx = _compare(Pa, cla, Pb, clb, delta)
            if fa >= TUBE_FRACTION and fb >= TUBE_FRACTION:
                cand.append((mean, mx, i, j, fa))
    cand.sort()
    used_a, used_b, pairs = set(), set(), []
    for mean, mx, i, j, fa in cand:
        if i in used_a or j in used_b:
            continue
        used_a.add(i)
        used_b.add(j)
        pairs.append(MatchPair(_cid(ca[i], i), _cid(cb[j], j), mean, mx, fa))
    pairs.sort(key=lambda p: p.a)
    un_a = [_cid(a, i) for i, a in enumerate(ca) if i not in used_a]
    un_b = [_cid(b, j) for j, b in enumerate(cb) if j not in used_b]
    if graph_on_matched_b:
        geq = graphs_equivalent(ca, [cb[j] for j in sorted(used_b)]) and not un_a
    else:
        geq = graphs_equivalent(ca, cb)
    return MatchReport(pairs, un_a, un_b, geq, float(delta))


def _cid(c, i):
    return c.id if isinstance(c, CriticalContour) else i


def match_contours(A, B, delta: float = DEFAULT_DELTA) -> MatchReport:
    """Match the admitted contours of two renderings of the same surface."""
    return _match(A, B, delta)


def align_with_slant(image_contours, slant, delta: float = DEFAULT_DELTA) -> MatchReport:
    """Match image contours against slant-field separatrices.

    ``slant`` is a :class:`ContourSet` (normally built with
    ``candidates=True``), a slant :class:`ScalarGrid`, or an
    :class:`MSComplex` of the slant field whose separatrices are used as is.
    ``graph_equivalent`` compares the image graph with the graph of the
    matched slant curves.
    """
    if isinstance(slant, ScalarGrid):
        slant = ContourSet.from_image(slant, candidates=True, name="slant")
    elif isinstance(slant, MSComplex):
        shape = tuple(slant.provenance.get("shape", ())) or None
        arcs = [_arc_contour(a, i) for i, a in enumerate(slant.separatrices)]
        slant = ContourSet(arcs, slant, shape, "slant")
    return _match(image_contours, slant, delta, graph_on_matched_b=True)


def _arc_contour(a, i) -> CriticalContour:
    P = np.asarray(a.polyline, float)
    z = np.zeros_like(P)
    return CriticalContour(i, (a.id,), a.origin, a.destination, a.kind, P, z, z,
                           float("nan"), float("nan"), False)


@dataclass(frozen=True)
class SuiteResult:
    names: list
    counts: list  # admitted contours per rendering
    pairwise: dict  # (name_a, name_b) -> MatchReport
    alignment: dict  # name -> MatchReport against slant separatrices

    def pairwise_ok(self, mean_tol: float = 2.0, max_tol: float = 3.0) -> bool:
        """Isomorphic graphs, nothing unmatched, every pair within the distance bounds."""
        return all(r.graph_equivalent and not r.unmatched_a and not r.unmatched_b
                   and all(p.mean_distance < mean_tol and p.max_distance < max_tol for p in r.pairs)
                   for r in self.pairwise.values())

    def aligned(self) -> bool:
        return all(not r.unmatched_a for r in self.alignment.values())

    def worst_max_distance(self) -> float:
        return max((p.max_distance for r in self.pairwise.values() for p in r.pairs), default=0.0)


def rendering_suite(surface, specs, grid: GridSpec, *, delta: float = DEFAULT_DELTA,
                    tau_fraction: float = TAU_FRACTION, K=None, M=None) -> SuiteResult:
    """Render ``surface`` under every spec, match all pairs and align each with the slant field."""
    n = normals(surface, grid)
    names = [sp.label() for sp in specs]
    if len(set(names)) != len(names):
        names = [f"{i}:{nm}" for i, nm in enumerate(names)]
    sets = {nm: ContourSet.from_image(render(n, sp), K=K, M=M, tau_fraction=tau_fraction, name=nm)
            for nm, sp in zip(names, specs)}
    slant = ContourSet.from_image(slant_field(n), candidates=True, tau_fraction=tau_fraction,
                                  name="slant")
    pairwise = {(a, b): match_contours(sets[a], sets[b], delta)
                for i, a in enumerate(names) for b in names[i + 1:]}
    alignment = {nm: align_with_slant(sets[nm], slant, delta) for nm in names}
    return SuiteResult(names, [len(sets[nm].contours) for nm in names], pairwise, alignment)


# ---------------------------------------------------------------------------
# bump template


@dataclass(frozen=True)
class BumpRecord:
    contour: int
    minimum: int
    minimum_position: tuple
    area: float
    polygon: np.ndarray = field(repr=False, compare=False)


def _polygon_area(P: np.ndarray) -> float:
    x, y = P[:, 0], P[:, 1]
    return 0.5 * abs(float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1))))


def detect_bump_template(slant_complex: MSComplex, contours) -> list[BumpRecord]:
    """Closed contours enclosing exactly one slant minimum and no slant maximum.

    Critical points lying on the contour itself (its saddle and extremum)
    are not counted as enclosed.
    """
    pts = [p for p in slant_complex.critical_points if not p.virtual and p.position is not None]
    out = []
    for cc in _contours(contours):
        if not cc.closed:
            continue
        P = cc.polyline
        own = {cc.saddle, cc.extremum}
        inner = [p for p in pts if p.id not in own and p.index != 1]
        if not inner:
            continue
        inside = points_in_poly(np.array([p.position for p in inner], float), P)
        mins = [p for p, f in zip(inner, inside) if f and p.index == 0]
        maxs = [p for p, f in zip(inner, inside) if f and p.index == 2]
        if len(mins) == 1 and not maxs:
            out.append(BumpRecord(cc.id, mins[0].id, tuple(mins[0].position), _polygon_area(P), P))
    return out


def interiors_disjoint(records, shape) -> bool:
    """True when no pixel centre lies inside two bump polygons."""
    H, W = shape
    yy, xx = np.mgrid[0:H, 0:W]
    pix = np.column_stack([xx.ravel(), yy.ravel()]).astype(float)
    count = np.zeros(len(pix), int)
    for r in records:
        count += points_in_poly(pix, r.polygon)
    return bool(count.max(initial=0) <= 1)


# ---------------------------------------------------------------------------
# scaffold reconstruction


def rasterize(polylines, shape) -> np.ndarray:
    """Boolean mask of pixels touched by the (densified) polylines."""
    H, W = shape
    mask = np.zeros((H, W), bool)
    for P in polylines:
        P = np.asarray(P, float)
        if len(P) == 0:
            continue
        Q = densify(P, 0.25) if len(P) > 1 else P
        ij = np.rint(Q).astype(int)
        ok = (ij[:, 0] >= 0) & (ij[:, 0] < W) & (ij[:, 1] >= 0) & (ij[:, 1] < H)
        mask[ij[ok, 1], ij[ok, 0]] = True
    return mask


def laplace_solve(values: np.ndarray, fixed: np.ndarray) -> np.ndarray:
    """Discrete harmonic interpolation with Dirichlet data on ``fixed`` pixels.

    Every pixel outside ``fixed`` satisfies the 5-point Laplace equation.
    Free pixels touching the grid edge would need a boundary condition, so
    the outer ring must be fixed.
    """
    values = np.asarray(values, float)
    fixed = np.asarray(fixed, bool)
    H, W = fixed.shape
    ring = np.ones((H, W), bool)
    ring[1:-1, 1:-1] = False
    if not fixed[ring].all():
        raise ParameterError("the grid border must carry Dirichlet data")
    if not fixed.any():
        raise ParameterError("no constraints given")
    free = ~fixed
    n = int(free.sum())
    out = np.where(fixed, values, 0.0)
    if n == 0:
        return out
    idx = -np.ones((H, W), np.int64)
    idx[free] = np.arange(n)
    fy, fx = np.nonzero(free)
    rows = [np.arange(n)]
    cols = [np.arange(n)]
    data = [np.full(n, 4.0)]
    b = np.zeros(n)
    for dy, dx in ((-1, 0), (1, 0), (0, -1), (0, 1)):
        ny, nx_ = fy + dy, fx + dx
        k = idx[ny, nx_]
        f = k >= 0
        rows.append(np.arange(n)[f])
        cols.append(k[f])
        data.append(np.full(int(f.sum()), -1.0))
        np.add.at(b, np.arange(n)[~f], values[ny[~f], nx_[~f]])
    A = sparse.csr_matrix((np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))),
                          shape=(n, n))
    out[free] = spsolve(A.tocsc(), b)
    return out


def reconstruct_scaffold(contours, data, grid: GridSpec | None = None, *,
                         boundary=None) -> ScalarGrid:
    """Laplace interpolation of ``data`` from the scaffold pixels and the grid border.

    ``contours`` are critical contours, separatrices or plain ``(n, 2)``
    pixel polylines.  ``data`` supplies target values: a :class:`ScalarGrid`
    or array sampled at the scaffold pixels, or a callable ``f(x, y)`` on
    pixel coordinates.  ``boundary`` overrides the border values (scalar,
    array or callable); by default the border takes ``data`` too.
    """
    contours = list(contours)
    if not contours and boundary is None:
        raise ParameterError("no constraints given")
    polys = []
    for c in contours:
        P = getattr(c, "polyline", c)
        polys.append(np.asarray(P, float))
    if isinstance(data, ScalarGrid):
        shape = data.values.shape
        grid = data.grid if grid is None else grid
    elif grid is not None:
        shape = grid.shape
    else:
        shape = np.shape(data)
    if grid is None:
        grid = GridSpec(shape[1], shape[0])
    H, W = shape
    yy, xx = np.mgrid[0:H, 0:W].astype(float)

    def field_of(src):
        if isinstance(src, ScalarGrid):
            return np.asarray(src.values, float)
        if callable(src):
            return np.asarray(src(xx, yy), float) * np.ones((H, W))
        return np.broadcast_to(np.asarray(src, float), (H, W))

    vals = field_of(data).copy()
    fixed = rasterize(polys, shape)
    ring = np.ones((H, W), bool)
    ring[1:-1, 1:-1] = False
    if boundary is not None:
        vals[ring] = field_of(boundary)[ring]
    fixed |= ring
    out = laplace_solve(vals, fixed)
    return ScalarGrid(out, grid.spacing, grid.origin, units="reconstruction",
                      meta={"n_fixed": int(fixed.sum())})


def laplace_residual(U: np.ndarray, fixed: np.ndarray) -> float:
    """Max 5-point residual over free pixels relative to the data range."""
    U = np.asarray(U, float)
    r = np.zeros_like(U)
    r[1:-1, 1:-1] = 4 * U[1:-1, 1:-1] - U[2:, 1:-1] - U[:-2, 1:-1] - U[1:-1, 2:] - U[1:-1, :-2]
    free = ~np.asarray(fixed, bool)
    scale = max(float(np.ptp(U)), 1e-300)
    return float(np.abs(r[free]).max(initial=0.0) / scale)


def pearson(a, b, mask=None) -> float:
    a = np.asarray(a, float)
    b = np.asarray(b, float)
    if mask is not None:
        a, b = a[mask], b[mask]
    return float(np.corrcoef(a.ravel(), b.ravel())[0, 1])
