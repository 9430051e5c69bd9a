"""Both sides of the second-order shading equations on analytic surfaces.

The image of a graph surface ``z = f(x, y)`` under a distant light ``L`` is
``I = L . N``.  Left-hand sides are image derivatives along the gradient
frame ``u = grad I / |grad I|``, ``v = rot90(u)``; right-hand sides combine
the shape operator ``dN``, the Hessian ``H`` and its directional derivative
``a[H]b = sum_ij T_kij a_i b_j`` (``T`` the third-derivative tensor).

Tangent vectors are represented in the orthonormal basis obtained from the
image plane by ``G^{1/2}`` (``G = I + g g^T``, ``g = grad f``).  In that
basis an image vector ``a`` lifts to ``G^{1/2} a`` and
``dN(a) = G^{-1/2} B a`` with ``B = H / W``, ``W = sqrt(1 + |g|^2)``.

Two evaluation paths exist.  The analytic path differentiates ``I`` by the
chain rule; the finite-difference path measures ``I`` and its derivatives
from a rendered image with central differences of step ``h``.
"""

from __future__ import annotations

import csv
import io
from dataclasses import asdict, dataclass, field
from functools import lru_cache

import numpy as np

from .surfacegen import AnalyticSurface, fundamental_forms, normal_from_gradient, sqrt_first_form

EQ_IDS = ("1", "2", "3", "4", "5a", "5b", "5c")
# Relative residuals divide by max(|lhs|, |rhs|, REL_FLOOR * |H_I|_2) with H_I the image
# Hessian.  The identities are components of H_I in the {u, v} frame, so its norm is the
# natural magnitude; dividing by a single near-zero component (I_uv often) is meaningless.
REL_FLOOR = 1.0
# |det H| threshold is DELTA_H_SCALE * (height range of the surface)^2 unless given
DELTA_H_SCALE = 1e-6
EPS_GRAD = 1e-8
THETA_ALIGN = np.deg2rad(5.0)


class ConditioningError(ValueError):
    """Hessian too close to singular for the identities to be evaluated."""


class DomainError(ValueError):
    """Point outside the hypotheses (shadow, flat image, misaligned ridge)."""


@dataclass(frozen=True)
class EquationResidual:
    point: tuple[float, float]
    eq_id: str
    lhs: float
    rhs: float
    abs_residual: float
    rel_residual: float
    det_H: float
    norm_Hinv: float
    extra: dict = field(default_factory=dict)

    @classmethod
    def make(cls, p, eq_id, lhs, rhs, det_H, norm_Hinv, floor, **extra):
        lhs, rhs = float(lhs), float(rhs)
        a = abs(lhs - rhs)
        den = max(abs(lhs), abs(rhs), floor, np.finfo(float).tiny)
        return cls((float(p[0]), float(p[1])), eq_id, lhs, rhs, a, a / den, float(det_H),
                   float(norm_Hinv), extra)


def height_scale(s: AnalyticSurface, n: int = 65) -> float:
    """Height range over the squared domain half-diagonal (units of ``H``)."""
    x0, x1, y0, y1 = s.domain
    X, Y = np.meshgrid(np.linspace(x0, x1, n), np.linspace(y0, y1, n))
    f = s(X, Y)
    r2 = 0.25 * ((x1 - x0) ** 2 + (y1 - y0) ** 2)
    return float(f.max() - f.min()) / r2


@lru_cache(maxsize=64)
def default_delta_H(s: AnalyticSurface) -> float:
    return DELTA_H_SCALE * height_scale(s) ** 2


# ---------------------------------------------------------------------------
# image side


def normal_jet(g, H, T):
    """Unit normal and its first and second partials (analytic)."""
    W = np.sqrt(1.0 + g @ g)
    nt = np.array([-g[0], -g[1], 1.0])
    dW = (H @ g) / W
    ddW = (H @ H + np.einsum("k,kab->ab", g, T)) / W - np.outer(dW, dW) / W
    iW = 1.0 / W
    diW = -dW / W**2
    ddiW = -ddW / W**2 + 2.0 * np.outer(dW, dW) / W**3
    dnt = [np.array([-H[0, a], -H[1, a], 0.0]) for a in range(2)]
    N = nt * iW
    dN = np.array([dnt[a] * iW + nt * diW[a] for a in range(2)])
    ddN = np.array([[np.array([-T[0, a, b], -T[1, a, b], 0.0]) * iW + dnt[a] * diW[b]
                     + dnt[b] * diW[a] + nt * ddiW[a, b] for b in range(2)] for a in range(2)])
    return N, dN, ddN


def image_jet(s: AnalyticSurface, L, p):
    """``I``, ``grad I`` and image Hessian at ``p`` for ``I = L . N`` (no clamping)."""
    j = s.eval(p[0], p[1])
    N, dN, ddN = normal_jet(j.grad, j.hess, j.third)
    L = np.asarray(L, float)
    return float(L @ N), dN @ L, ddN @ L


def image_jet_fd(s: AnalyticSurface, L, p, h: float):
    """Same quantities from a rendered image by central differences of step ``h``."""
    d = _point_data(s, p, "fd", h)
    return _fd_jet(d.stencil, np.asarray(L, float), h)


# ---------------------------------------------------------------------------
# surface side


@dataclass(frozen=True)
class _Context:
    p: tuple
    L: np.ndarray
    g: np.ndarray
    H: np.ndarray
    T: np.ndarray
    W: float
    B: np.ndarray
    Gh: np.ndarray
    Gih: np.ndarray
    Hinv: np.ndarray
    det_H: float
    norm_Hinv: float
    I: float
    gI: np.ndarray
    HI: np.ndarray
    u: np.ndarray
    v: np.ndarray

    def dN(self, a):
        return self.Gih @ self.B @ a

    def dirH(self, a, b):
        return np.einsum("kij,i,j->k", self.T, a, b)

    def ghat(self):
        return self.Gh @ self.g


@dataclass(frozen=True)
class _PointData:
    p: tuple
    g: np.ndarray
    H: np.ndarray
    T: np.ndarray
    W: float
    B: np.ndarray
    Gh: np.ndarray
    Gih: np.ndarray
    det_H: float
    N: np.ndarray
    dN: np.ndarray  # (2, 3) partials of the unit normal
    ddN: np.ndarray  # (2, 2, 3)
    stencil: np.ndarray | None  # (3, 3, 3) normals on the finite-difference stencil
    h: float | None


def _point_data(s, p, path="analytic", h=None) -> _PointData:
    j = s.eval(p[0], p[1])
    g, H, T = j.grad, j.hess, j.third
    _, B, W = fundamental_forms(g, H)
    Gh, Gih = sqrt_first_form(g)
    N, dN, ddN = normal_jet(g, H, T)
    st = None
    if path == "fd":
        if h is None:
            raise ValueError("finite-difference path needs a step h")
        off = np.array([-h, 0.0, h])
        X, Y = np.meshgrid(p[0] + off, p[1] + off)
        st = normal_from_gradient(s.eval(X, Y).grad)
    elif path != "analytic":
        raise ValueError(f"unknown path {path!r}")
    return _PointData(tuple(p), g, H, T, float(W), B, Gh, Gih, float(np.linalg.det(H)), N, dN,
                      ddN, st, h)


def _fd_jet(st, L, h):
    I = st @ L
    gx = (I[1, 2] - I[1, 0]) / (2 * h)
    gy = (I[2, 1] - I[0, 1]) / (2 * h)
    Ixx = (I[1, 2] - 2 * I[1, 1] + I[1, 0]) / h**2
    Iyy = (I[2, 1] - 2 * I[1, 1] + I[0, 1]) / h**2
    Ixy = (I[2, 2] - I[2, 0] - I[0, 2] + I[0, 0]) / (4 * h**2)
    return float(I[1, 1]), np.array([gx, gy]), np.array([[Ixx, Ixy], [Ixy, Iyy]])


def _context_from(d: _PointData, L, *, delta_H, eps_grad=EPS_GRAD, require_gradient=True,
                  check_det=True) -> _Context:
    L = np.asarray(L, float)
    L = L / np.linalg.norm(L)
    if check_det and abs(d.det_H) <= delta_H:
        raise ConditioningError(f"|det H| = {abs(d.det_H):.3g} <= {delta_H:g}")
    if L @ d.N <= 0:
        raise DomainError("point is in attached shadow")
    if d.stencil is None:
        I, gI, HI = float(L @ d.N), d.dN @ L, d.ddN @ L
    else:
        I, gI, HI = _fd_jet(d.stencil, L, d.h)
    m = float(np.hypot(*gI))
    if m <= eps_grad:
        if require_gradient:
            raise DomainError("image gradient vanishes; frame undefined")
        u = np.array([1.0, 0.0])
    else:
        u = gI / m
    v = np.array([-u[1], u[0]])
    Hinv = np.linalg.pinv(d.H) if not check_det else np.linalg.inv(d.H)
    return _Context(d.p, L, d.g, d.H, d.T, d.W, d.B, d.Gh, d.Gih, Hinv, d.det_H,
                    float(np.linalg.norm(Hinv, 2)), I, gI, HI, u, v)


def _context(s, L, p, *, path="analytic", h=None, delta_H=None, eps_grad=EPS_GRAD,
             require_gradient=True) -> _Context:
    if delta_H is None:
        delta_H = default_delta_H(s)
    return _context_from(_point_data(s, p, path, h), L, delta_H=delta_H, eps_grad=eps_grad,
                         require_gradient=require_gradient)


def _rhs(c: _Context, eq_id: str) -> tuple[float, float]:
    u, v = c.u, c.v
    gI = c.gI
    m = float(np.hypot(*gI))
    dNu, dNv = c.dN(u), c.dN(v)
    gh = c.ghat()
    if eq_id == "1":
        return c.HI @ v @ v, -c.I * dNv @ dNv + gI @ c.Hinv @ c.dirH(v, v)
    if eq_id == "2":
        return (c.HI @ u @ u,
                -c.I * dNu @ dNu - 2.0 * m / c.W * (gh @ dNu) + gI @ c.Hinv @ c.dirH(u, u))
    if eq_id == "3":
        return (u @ c.HI @ v,
                -c.I * dNv @ dNu - m / c.W * (gh @ dNv) + gI @ c.Hinv @ c.dirH(u, v))
    raise ValueError(f"unknown equation {eq_id!r}")


def eval_shading_eq(s: AnalyticSurface, L, p, eq_id, *, path: str = "analytic", h=None,
                    delta_H: float | None = None, eps_grad: float = EPS_GRAD,
                    floor: float = REL_FLOOR) -> EquationResidual:
    """Evaluate one of the three second-order shading identities at ``p``."""
    c = _context(s, L, p, path=path, h=h, delta_H=delta_H, eps_grad=eps_grad)
    return _eq_from(c, str(eq_id), floor, path)


def _eq_from(c: _Context, eq_id: str, floor: float, path: str) -> EquationResidual:
    lhs, rhs = _rhs(c, eq_id)
    return EquationResidual.make(c.p, eq_id, lhs, rhs, c.det_H, c.norm_Hinv,
                                 floor * np.linalg.norm(c.HI, 2), path=path)


def eval_eq4(s: AnalyticSurface, L, p, *, path: str = "analytic", h=None,
             delta_H: float | None = None, eps_grad: float = EPS_GRAD, i_floor: float = 1e-6,
             floor: float = REL_FLOOR) -> EquationResidual:
    """Isophote-curvature form: ``(grad I . kappa) / I`` against ``|dN(v)|^2``.

    With ``kappa = -(I_vv / |grad I|) u`` the left side is ``-I_vv / I``, so
    the identity differs from the first equation by the correction
    ``-(grad I . H^{-1}(v[H]v)) / I``, returned in ``extra["correction"]``.
    """
    c = _context(s, L, p, path=path, h=h, delta_H=delta_H, eps_grad=eps_grad)
    return _eq4_from(c, i_floor, floor, path)


def _eq4_from(c: _Context, i_floor: float, floor: float, path: str) -> EquationResidual:
    if c.I <= i_floor:
        raise DomainError("intensity below floor")
    m = float(np.hypot(*c.gI))
    kappa = -(c.v @ c.HI @ c.v) / m * c.u
    lhs = (c.gI @ kappa) / c.I
    dNv = c.dN(c.v)
    rhs = dNv @ dNv
    corr = -(c.gI @ c.Hinv @ c.dirH(c.v, c.v)) / c.I
    return EquationResidual.make(c.p, "4", lhs, rhs, c.det_H, c.norm_Hinv,
                                 floor * np.linalg.norm(c.HI, 2) / c.I,
                                 correction=float(corr), kappa=tuple(kappa.tolist()), path=path)


# ---------------------------------------------------------------------------
# ridge reduction


def principal_directions(s: AnalyticSurface, p):
    """Principal curvatures and directions as unit image-plane vectors (ascending |k|)."""
    j = s.eval(p[0], p[1])
    _, B, _ = fundamental_forms(j.grad, j.hess)
    _, Gih = sqrt_first_form(j.grad)
    S = Gih @ B @ Gih
    k, E = np.linalg.eigh(0.5 * (S + S.T))
    order = np.argsort(np.abs(k))
    dirs = []
    for i in order:
        a = Gih @ E[:, i]
        dirs.append(a / np.linalg.norm(a))
    return k[order], np.array(dirs)


def _axis_angle(a, b) -> float:
    c = abs(float(a @ b)) / (np.linalg.norm(a) * np.linalg.norm(b))
    return float(np.arccos(min(1.0, c)))


def ridge_frame(s: AnalyticSurface, L, p):
    """Intensity-ridge direction ``u`` (image Hessian eigenvector of least |eigenvalue|)."""
    _, _, HI = image_jet(s, L, p)
    lam, E = np.linalg.eigh(HI)
    u = E[:, int(np.argmin(np.abs(lam)))]
    return u, np.array([-u[1], u[0]])


def projected_light(c: _Context, u, v):
    """Coefficients ``(l1, l2)`` of the tangential light along the lifted ``u``, ``v``."""
    N = np.array([-c.g[0], -c.g[1], 1.0]) / c.W
    lt = c.L - (c.L @ N) * N
    Tu = np.array([u[0], u[1], c.g @ u])
    Tv = np.array([v[0], v[1], c.g @ v])
    A = np.column_stack([Tu / np.linalg.norm(Tu), Tv / np.linalg.norm(Tv)])
    coef, *_ = np.linalg.lstsq(A, lt, rcond=None)
    return float(coef[0]), float(coef[1])


def eval_ridge_eqs(s: AnalyticSurface, L, p, *, theta_align: float = THETA_ALIGN,
                   floor: float = REL_FLOOR) -> list[EquationResidual]:
    """Residuals of the ridge-reduced equations at a point on an intensity ridge.

    ``u`` runs along the ridge, ``v`` across it.  The surface's principal
    direction of least curvature must lie within ``theta_align`` of ``u``.
    """
    u, v = ridge_frame(s, L, p)
    _, dirs = principal_directions(s, p)
    ang = _axis_angle(u, dirs[0])
    if ang > theta_align:
        raise DomainError(f"ridge direction misaligned by {np.rad2deg(ang):.2f} deg")
    c = _ridge_context(s, L, p, u, v)
    _, l2 = projected_light(c, u, v)
    T = c.T
    f3 = lambda a, b, d: float(np.einsum("ijk,i,j,k->", T, a, b, d))  # noqa: E731
    I_uu = u @ c.HI @ u
    I_vv = v @ c.HI @ v
    I_uv = u @ c.HI @ v
    dNv = c.Gih @ c.B @ v
    det, nh = c.det_H, c.norm_Hinv
    floor = floor * np.linalg.norm(c.HI, 2)
    ex = dict(align_deg=float(np.rad2deg(ang)), l2=l2)
    return [
        EquationResidual.make(p, "5a", I_vv + c.I * dNv @ dNv, l2 * f3(v, v, u) / c.W, det, nh,
                              floor, **ex),
        EquationResidual.make(p, "5b", I_uu, l2 * f3(u, u, u) / c.W, det, nh, floor, **ex),
        EquationResidual.make(p, "5c", I_uv, l2 * f3(v, u, u) / c.W, det, nh, floor, **ex),
    ]


def _ridge_context(s, L, p, u, v) -> _Context:
    c = _context_from(_point_data(s, p), L, delta_H=0.0, require_gradient=False, check_det=False)
    return _Context(**{**c.__dict__, "u": u, "v": v})


def find_crest(s: AnalyticSurface, L, p0, across, tol: float = 1e-13, max_iter: int = 60):
    """Newton search for the intensity maximum along the line ``p0 + t * across``."""
    across = np.asarray(across, float)
    across = across / np.linalg.norm(across)
    p = np.asarray(p0, float)
    for _ in range(max_iter):
        _, gI, HI = image_jet(s, L, p)
        d1 = gI @ across
        d2 = across @ HI @ across
        if d2 >= 0:
            raise DomainError("no intensity crest (not concave across)")
        step = -d1 / d2
        p = p + step * across
        if abs(step) < tol:
            break
    return p


# ---------------------------------------------------------------------------
# sweeps


@dataclass
class SweepTable:
    rows: list = field(default_factory=list)
    skipped: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.rows)

    def rel(self, eq_id=None) -> np.ndarray:
        return np.array([r.rel_residual for r in self.rows if eq_id is None or r.eq_id == eq_id])

    def stats(self) -> list[dict]:
        """Median, p95 and max relative residual per equation and |det H| decile."""
        out = []
        for eq in sorted({r.eq_id for r in self.rows}):
            rs = [r for r in self.rows if r.eq_id == eq]
            dets = np.array([abs(r.det_H) for r in rs])
            rel = np.array([r.rel_residual for r in rs])
            out.append(_stat_row(eq, "all", dets, rel))
            edges = np.quantile(dets, np.linspace(0, 1, 11))
            idx = np.clip(np.searchsorted(edges, dets, side="right") - 1, 0, 9)
            for d in range(10):
                m = idx == d
                if m.any():
                    out.append(_stat_row(eq, str(d), dets[m], rel[m]))
        return out

    def to_csv(self, path=None) -> str:
        cols = ["eq_id", "decile", "n", "det_lo", "det_hi", "median", "p95", "max"]
        buf = io.StringIO()
        w = csv.DictWriter(buf, cols, lineterminator="\n")
        w.writeheader()
        for row in self.stats():
            w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in row.items()})
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", newline="") as fh:
                fh.write(text)
        return text

    def rows_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["x", "y", "eq_id", "lhs", "rhs", "abs_residual", "rel_residual", "det_H"])
        for r in self.rows:
            w.writerow([repr(r.point[0]), repr(r.point[1]), r.eq_id, repr(r.lhs), repr(r.rhs),
                        repr(r.abs_residual), repr(r.rel_residual), repr(r.det_H)])
        return buf.getvalue()


def _stat_row(eq, decile, dets, rel):
    return dict(eq_id=eq, decile=decile, n=int(rel.size), det_lo=float(dets.min()),
                det_hi=float(dets.max()), median=float(np.median(rel)),
                p95=float(np.percentile(rel, 95)), max=float(rel.max()))


def residual_sweep(s: AnalyticSurface, lights, points, eq_ids=("1", "2", "3"), *,
                   path: str = "analytic", h=None, delta_H: float | None = None,
                   eps_grad: float = EPS_GRAD, floor: float = REL_FLOOR,
                   i_floor: float = 1e-6) -> SweepTable:
    """Evaluate every (light, point, equation); pairs failing a precondition are skipped."""
    tab = SweepTable()
    if delta_H is None:
        delta_H = default_delta_H(s)
    eq_ids = [str(e) for e in eq_ids]
    rows = {}
    for ip, p in enumerate(points):
        d = _point_data(s, p, path, h)
        for iL, L in enumerate(lights):
            for eq in eq_ids:
                try:
                    if eq in ("1", "2", "3", "4"):
                        c = _context_from(d, L, delta_H=delta_H, eps_grad=eps_grad)
                        r = _eq4_from(c, i_floor, floor, path) if eq == "4" else _eq_from(c, eq, floor, path)
                    else:
                        r = next(x for x in eval_ridge_eqs(s, L, p, floor=floor) if x.eq_id == eq)
                except (ConditioningError, DomainError) as e:
                    key = type(e).__name__
                    tab.skipped[key] = tab.skipped.get(key, 0) + 1
                    continue
                rows[(iL, ip, eq)] = r
    tab.rows = [rows[k] for k in sorted(rows)]
    return tab


def random_lights(n: int, rng, max_polar: float = np.deg2rad(60.0)) -> np.ndarray:
    """Unit lights with polar angle below ``max_polar`` (front hemisphere)."""
    rng = np.random.default_rng(rng)
    cz = rng.uniform(np.cos(max_polar), 1.0, n)
    ph = rng.uniform(0, 2 * np.pi, n)
    r = np.sqrt(1 - cz * cz)
    return np.column_stack([r * np.cos(ph), r * np.sin(ph), cz])


def sample_points(s: AnalyticSurface, n: int, rng, *, delta_H: float | None = None,
                  margin: float = 0.05, max_tries: int = 100000) -> np.ndarray:
    """``n`` random domain points with ``|det H| > delta_H``."""
    rng = np.random.default_rng(rng)
    if delta_H is None:
        delta_H = default_delta_H(s)
    x0, x1, y0, y1 = s.domain
    mx, my = margin * (x1 - x0), margin * (y1 - y0)
    pts = []
    for _ in range(max_tries):
        if len(pts) == n:
            break
        p = (rng.uniform(x0 + mx, x1 - mx), rng.uniform(y0 + my, y1 - my))
        if abs(np.linalg.det(s.eval(*p).hess)) > delta_H:
            pts.append(p)
    return np.array(pts)


def residual_dicts(rows) -> list[dict]:
    return [asdict(r) for r in rows]


def twist_sweep(coeffs=(0.0, 0.3, 0.02, 0.001), L=(0.0, -0.8, 1.0), angles_deg=None,
                s0: float = 0.0, domain=(-50, 50, -50, 50)) -> list[dict]:
    """Ridge-equation residuals on a twisted cubic cylinder against misalignment.

    For each target angle the twist coefficient is solved for so that the
    intensity-ridge direction at the crest deviates from the zero-curvature
    principal direction by that angle.  Rows hold the angle, the twist and
    the largest absolute residual of the three reduced equations.
    """
    from scipy.optimize import brentq

    from .surfacegen import ridge

    L = np.asarray(L, float)
    L = L / np.linalg.norm(L)
    angles_deg = np.linspace(0.0, 10.0, 11) if angles_deg is None else np.asarray(angles_deg)
    c = list(coeffs) + [0.0] * (4 - len(coeffs))
    # crest of the untwisted cylinder: g'(t) = -L_y / L_z
    roots = np.roots([3 * c[3], 2 * c[2], c[1] + L[1] / L[2]]) if c[3] else \
        np.array([-(c[1] + L[1] / L[2]) / (2 * c[2])])
    roots = roots[np.isreal(roots)].real
    t0 = float(roots[np.argmax(2 * c[2] + 6 * c[3] * roots)])

    def evaluate(w):
        srf = ridge(c, "cubic", twist=w, domain=domain)
        p = find_crest(srf, L, (s0, t0), (0.0, 1.0))
        rs = eval_ridge_eqs(srf, L, p, theta_align=np.pi / 2)
        return p, rs[0].extra["align_deg"], rs

    rows = []
    w_lo = 0.0
    for a in angles_deg:
        if a == 0:
            w = 0.0
        else:
            w_hi = max(w_lo, 1e-4)
            while evaluate(w_hi)[1] < a:
                w_hi *= 2.0
            w = brentq(lambda x: evaluate(x)[1] - a, w_lo, w_hi, xtol=1e-14)
            w_lo = w
        p, ang, rs = evaluate(w)
        rows.append(dict(angle_deg=float(ang), twist=float(w), x=float(p[0]), y=float(p[1]),
                         max_abs_residual=max(r.abs_residual for r in rs),
                         residuals={r.eq_id: r.abs_residual for r in rs}))
    return rows
