"""Analytic height fields with exact derivatives up to third order.

Every surface is a sum of closed-form terms.  Each term knows how to
evaluate its value, gradient, Hessian and symmetric third-derivative
tensor, so downstream verification never has to differentiate a sampled
grid.  World coordinates are ``(x, y)``; sampled arrays are indexed
``[row, col]`` with ``row`` along ``y`` and ``col`` along ``x``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

DEFAULT_TILT = 0.02


class ParameterError(ValueError):
    """Raised when a surface or grid is constructed with invalid parameters."""


class SurfaceJet(NamedTuple):
    f: np.ndarray
    grad: np.ndarray  # (..., 2)
    hess: np.ndarray  # (..., 2, 2)
    third: np.ndarray  # (..., 2, 2, 2)


# ---------------------------------------------------------------------------
# grids


@dataclass(frozen=True)
class GridSpec:
    """Uniform pixel lattice mapped onto world coordinates."""

    width: int
    height: int
    spacing: float = 1.0
    origin: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        if self.width < 8 or self.height < 8:
            raise ParameterError("grid must be at least 8x8")
        if not self.spacing > 0:
            raise ParameterError("spacing must be positive")

    @property
    def shape(self) -> tuple[int, int]:
        return (self.height, self.width)

    def coords(self) -> tuple[np.ndarray, np.ndarray]:
        """World ``(X, Y)`` arrays of shape ``(height, width)``."""
        xs = self.origin[0] + self.spacing * np.arange(self.width)
        ys = self.origin[1] + self.spacing * np.arange(self.height)
        return np.meshgrid(xs, ys)

    def to_world(self, px) -> np.ndarray:
        px = np.asarray(px, dtype=float)
        return np.asarray(self.origin) + self.spacing * px

    def to_pixel(self, pt) -> np.ndarray:
        pt = np.asarray(pt, dtype=float)
        return (pt - np.asarray(self.origin)) / self.spacing

    @property
    def extent(self) -> tuple[float, float, float, float]:
        x0, y0 = self.origin
        return (x0, x0 + self.spacing * (self.width - 1),
                y0, y0 + self.spacing * (self.height - 1))


@dataclass(frozen=True, eq=False)
class ScalarGrid:
    """Sampled scalar field (intensity, slant, height, ...)."""

    values: np.ndarray
    spacing: float = 1.0
    origin: tuple[float, float] = (0.0, 0.0)
    units: str = "intensity"
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.ndim != 2:
            raise ParameterError("ScalarGrid values must be 2-D")
        if v.shape[0] < 8 or v.shape[1] < 8:
            raise ParameterError("ScalarGrid must be at least 8x8")
        if not np.all(np.isfinite(v)):
            raise ParameterError("ScalarGrid values must be finite")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def grid(self) -> GridSpec:
        return GridSpec(self.width, self.height, self.spacing, tuple(self.origin))

    def with_values(self, values, **kw) -> "ScalarGrid":
        args = dict(spacing=self.spacing, origin=self.origin, units=self.units,
                    meta=dict(self.meta))
        args.update(kw)
        return ScalarGrid(values, **args)


@dataclass(frozen=True, eq=False)
class NormalField:
    n: np.ndarray  # (H, W, 3)
    spacing: float = 1.0
    origin: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        n = np.array(self.n, dtype=float)
        n.setflags(write=False)
        object.__setattr__(self, "n", n)

    @property
    def shape(self) -> tuple[int, int]:
        return self.n.shape[:2]


# ---------------------------------------------------------------------------
# terms


class _Term:
    def jet(self, x: np.ndarray, y: np.ndarray) -> SurfaceJet:
        raise NotImplementedError


def _zeros(x):
    shape = np.shape(x)
    return (np.zeros(shape), np.zeros(shape + (2,)), np.zeros(shape + (2, 2)),
            np.zeros(shape + (2, 2, 2)))


@dataclass(frozen=True)
class PlaneTerm(_Term):
    c0: float = 0.0
    a: float = 0.0
    b: float = 0.0

    def jet(self, x, y):
        f, g, h, t = _zeros(x)
        f[...] = self.c0 + self.a * x + self.b * y
        g[..., 0] = self.a
        g[..., 1] = self.b
        return SurfaceJet(f, g, h, t)


@dataclass(frozen=True)
class PolynomialTerm(_Term):
    """Cubic Taylor patch about ``center``.

    ``coeffs = (c0, c1, ..., c9)`` multiply
    ``1, x, y, x^2, xy, y^2, x^3, x^2 y, x y^2, y^3`` in local coordinates.
    """

    coeffs: tuple[float, ...]
    center: tuple[float, float] = (0.0, 0.0)

    def jet(self, x, y):
        c = np.zeros(10)
        c[: len(self.coeffs)] = self.coeffs
        X = np.asarray(x, float) - self.center[0]
        Y = np.asarray(y, float) - self.center[1]
        f, g, h, t = _zeros(X)
        f[...] = (c[0] + c[1] * X + c[2] * Y + c[3] * X**2 + c[4] * X * Y
                  + c[5] * Y**2 + c[6] * X**3 + c[7] * X**2 * Y
                  + c[8] * X * Y**2 + c[9] * Y**3)
        g[..., 0] = (c[1] + 2 * c[3] * X + c[4] * Y + 3 * c[6] * X**2
                     + 2 * c[7] * X * Y + c[8] * Y**2)
        g[..., 1] = (c[2] + c[4] * X + 2 * c[5] * Y + c[7] * X**2
                     + 2 * c[8] * X * Y + 3 * c[9] * Y**2)
        h[..., 0, 0] = 2 * c[3] + 6 * c[6] * X + 2 * c[7] * Y
        h[..., 0, 1] = h[..., 1, 0] = c[4] + 2 * c[7] * X + 2 * c[8] * Y
        h[..., 1, 1] = 2 * c[5] + 2 * c[8] * X + 6 * c[9] * Y
        txxx, txxy, txyy, tyyy = 6 * c[6], 2 * c[7], 2 * c[8], 6 * c[9]
        t[..., 0, 0, 0] = txxx
        t[..., 0, 0, 1] = t[..., 0, 1, 0] = t[..., 1, 0, 0] = txxy
        t[..., 0, 1, 1] = t[..., 1, 0, 1] = t[..., 1, 1, 0] = txyy
        t[..., 1, 1, 1] = tyyy
        return SurfaceJet(f, g, h, t)


def _logistic(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


@dataclass(frozen=True)
class QuadFormTerm(_Term):
    """``amp * phi(Q)`` with ``Q = (d^T A d) / 2`` and ``d = p - center``.

    ``profile`` is ``"gaussian"`` (``phi = exp(-Q)``) or ``"sigmoid"``
    (a logistic step of ``r = sqrt(2 Q)``, centred on ``radius`` with
    transition width ``width``; with ``A = I`` these are world units, with
    an anisotropic ``A`` they are in the metric of ``A``).
    """

    center: tuple[float, float]
    A: tuple[tuple[float, float], tuple[float, float]]
    amp: float
    profile: str = "gaussian"
    radius: float = 0.0
    width: float = 1.0

    def _phi(self, Q):
        if self.profile == "gaussian":
            e = np.exp(-Q)
            return e, -e, e, -e
        if self.profile == "sigmoid":
            R, w = self.radius, self.width
            k = -1.0 / (R * w)
            z = (R * R - 2.0 * Q) / (2.0 * R * w)
            s = _logistic(z)
            s1 = s * (1 - s)
            s2 = s1 * (1 - 2 * s)
            s3 = s1 * (1 - 6 * s + 6 * s * s)
            return s, k * s1, k * k * s2, k**3 * s3
        raise ParameterError(f"unknown profile {self.profile!r}")

    def jet(self, x, y):
        A = np.asarray(self.A, float)
        d = np.stack([np.asarray(x, float) - self.center[0],
                      np.asarray(y, float) - self.center[1]], axis=-1)
        g = d @ A.T  # A symmetric: g = A d
        Q = 0.5 * np.einsum("...i,...i->...", d, g)
        p0, p1, p2, p3 = self._phi(Q)
        a = self.amp
        eye_g = (np.einsum("ij,...k->...ijk", A, g)
                 + np.einsum("ik,...j->...ijk", A, g)
                 + np.einsum("jk,...i->...ijk", A, g))
        f = a * p0
        grad = a * p1[..., None] * g
        gg = np.einsum("...i,...j->...ij", g, g)
        hess = a * (p2[..., None, None] * gg + p1[..., None, None] * A)
        ggg = np.einsum("...ij,...k->...ijk", gg, g)
        third = a * (p3[..., None, None, None] * ggg
                     + p2[..., None, None, None] * eye_g)
        return SurfaceJet(f, grad, hess, third)


def _cubic_eval(c, t):
    c = list(c) + [0.0] * (4 - len(c))
    c0, c1, c2, c3 = c[:4]
    return (c0 + c1 * t + c2 * t**2 + c3 * t**3,
            c1 + 2 * c2 * t + 3 * c3 * t**2,
            2 * c2 + 6 * c3 * t,
            6 * c3 + 0 * t)


@dataclass(frozen=True)
class RidgeTerm(_Term):
    """Cylinder-like ridge in a rotated frame.

    With ``s`` along the axis (angle ``theta``) and ``t`` across it,
    ``f = g(t) + bend * s^2 + twist * s * t^2`` where ``g`` is either a cubic
    polynomial (``profile="cubic"``, ``coeffs = (c0, c1, c2, c3)``) or a
    Gaussian ridge (``profile="gaussian"``, ``coeffs = (amp, width)``).
    """

    coeffs: tuple[float, ...]
    profile: str = "cubic"
    theta: float = 0.0
    center: tuple[float, float] = (0.0, 0.0)
    bend: float = 0.0
    twist: float = 0.0

    def _profile(self, t):
        if self.profile == "cubic":
            return _cubic_eval(self.coeffs, t)
        if self.profile == "gaussian":
            amp, w = self.coeffs
            e = amp * np.exp(-0.5 * (t / w) ** 2)
            u = t / w**2
            return e, -u * e, (u * u - 1 / w**2) * e, (3 * u / w**2 - u**3) * e
        raise ParameterError(f"unknown profile {self.profile!r}")

    def jet(self, x, y):
        c, s_ = np.cos(self.theta), np.sin(self.theta)
        X = np.asarray(x, float) - self.center[0]
        Y = np.asarray(y, float) - self.center[1]
        s = c * X + s_ * Y
        t = -s_ * X + c * Y
        g0, g1, g2, g3 = self._profile(t)
        b, w = self.bend, self.twist
        f, G, H, T = _zeros(X)
        f[...] = g0 + b * s**2 + w * s * t**2
        # local (s, t) derivatives
        G[..., 0] = 2 * b * s + w * t**2
        G[..., 1] = g1 + 2 * w * s * t
        H[..., 0, 0] = 2 * b
        H[..., 0, 1] = H[..., 1, 0] = 2 * w * t
        H[..., 1, 1] = g2 + 2 * w * s
        T[..., 1, 1, 1] = g3
        T[..., 0, 1, 1] = T[..., 1, 0, 1] = T[..., 1, 1, 0] = 2 * w
        J = np.array([[c, s_], [-s_, c]])  # d(s,t)/d(x,y)
        grad = G @ J
        hess = np.einsum("...ab,ai,bj->...ij", H, J, J)
        third = np.einsum("...abc,ai,bj,ck->...ijk", T, J, J, J)
        return SurfaceJet(f, grad, hess, third)


# ---------------------------------------------------------------------------
# surface


KINDS = ("SigmoidalBump", "GaussianBlobSum", "Ridge", "Quadratic", "TiltedPlane")


@dataclass(frozen=True, eq=False)
class AnalyticSurface:
    """Closed-form height field ``f(x, y)``: a sum of analytic terms."""

    kind: str
    params: dict
    domain: tuple[float, float, float, float]
    terms: tuple[_Term, ...]

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ParameterError(f"unknown surface kind {self.kind!r}")

    def eval(self, x, y) -> SurfaceJet:
        x = np.asarray(x, float)
        y = np.asarray(y, float)
        f, g, h, t = _zeros(np.broadcast_to(x, np.broadcast(x, y).shape))
        for term in self.terms:
            j = term.jet(x, y)
            f = f + j.f
            g = g + j.grad
            h = h + j.hess
            t = t + j.third
        return SurfaceJet(f, g, h, t)

    def __call__(self, x, y):
        return self.eval(x, y).f

    def contains(self, p) -> bool:
        x0, x1, y0, y1 = self.domain
        return x0 <= p[0] <= x1 and y0 <= p[1] <= y1

    def sample(self, grid: GridSpec) -> ScalarGrid:
        X, Y = grid.coords()
        return ScalarGrid(self.eval(X, Y).f, grid.spacing, grid.origin, units="height")

    def plus(self, other: "AnalyticSurface", kind: str | None = None) -> "AnalyticSurface":
        x0 = min(self.domain[0], other.domain[0])
        x1 = max(self.domain[1], other.domain[1])
        y0 = min(self.domain[2], other.domain[2])
        y1 = max(self.domain[3], other.domain[3])
        return AnalyticSurface(kind or self.kind, {**other.params, **self.params},
                               (x0, x1, y0, y1), self.terms + other.terms)


def _domain(domain):
    if domain is None:
        return (0.0, 255.0, 0.0, 255.0)
    x0, x1, y0, y1 = map(float, domain)
    if not (x1 > x0 and y1 > y0):
        raise ParameterError("domain must be a non-empty rectangle")
    return (x0, x1, y0, y1)


def _tilt_term(tilt, angle, origin=(0.0, 0.0)):
    a = tilt * np.cos(angle)
    b = tilt * np.sin(angle)
    return PlaneTerm(-(a * origin[0] + b * origin[1]), a, b)


def tilted_plane(slope_x: float, slope_y: float, offset: float = 0.0,
                 domain=None) -> AnalyticSurface:
    return AnalyticSurface("TiltedPlane", dict(slope_x=slope_x, slope_y=slope_y, offset=offset),
                           _domain(domain), (PlaneTerm(offset, slope_x, slope_y),))


def quadratic(coeffs: Sequence[float], center=(0.0, 0.0), domain=None) -> AnalyticSurface:
    """Taylor patch; ``coeffs`` as in :class:`PolynomialTerm` (cubic terms optional)."""
    coeffs = tuple(float(c) for c in coeffs)
    if len(coeffs) > 10:
        raise ParameterError("at most 10 Taylor coefficients")
    return AnalyticSurface("Quadratic", dict(coeffs=coeffs, center=tuple(center)),
                           _domain(domain), (PolynomialTerm(coeffs, tuple(center)),))


def ridge(coeffs: Sequence[float], profile: str = "cubic", theta: float = 0.0,
          center=(0.0, 0.0), bend: float = 0.0, twist: float = 0.0,
          domain=None) -> AnalyticSurface:
    term = RidgeTerm(tuple(float(c) for c in coeffs), profile, float(theta),
                     tuple(center), float(bend), float(twist))
    term._profile(np.zeros(1))  # validates profile
    return AnalyticSurface("Ridge", dict(coeffs=term.coeffs, profile=profile, theta=theta,
                                         center=tuple(center), bend=bend, twist=twist),
                           _domain(domain), (term,))


def make_sigmoidal_bump(center, radius: float, height: float,
                        base_tilt: float | None = None, *, width: float | None = None,
                        tilt_angle: float = 0.4, domain=None) -> AnalyticSurface:
    """Rotationally symmetric sigmoid bump on a tilted plane.

    ``height`` is the amplitude of a logistic step in ``r^2`` that falls to
    half height at ``radius`` over a transition of about ``width`` (default
    ``radius/5``).  The centre reaches ``height * logistic(radius / (2 width))``,
    about 92% of ``height`` at the default width.
    ``base_tilt`` defaults to ``DEFAULT_TILT`` so the result is generic.
    """
    if not radius > 0:
        raise ParameterError("radius must be positive")
    width = radius / 5.0 if width is None else float(width)
    if not width > 0:
        raise ParameterError("width must be positive")
    base_tilt = DEFAULT_TILT if base_tilt is None else float(base_tilt)
    center = (float(center[0]), float(center[1]))
    terms = (QuadFormTerm(center, ((1.0, 0.0), (0.0, 1.0)), float(height), "sigmoid",
                          float(radius), width),
             _tilt_term(base_tilt, tilt_angle, center))
    return AnalyticSurface("SigmoidalBump",
                           dict(center=center, radius=float(radius), height=float(height),
                                base_tilt=base_tilt, width=width, tilt_angle=tilt_angle),
                           _domain(domain), terms)


def gaussian_blob_sum(lobes, tilt: float | None = None, tilt_angle: float = 0.4,
                      domain=None, *, profile: str = "gaussian", flank: float = 0.15) -> AnalyticSurface:
    """Sum of anisotropic lobes plus a tilt.

    ``lobes`` is a sequence of ``(center, covariance, amplitude)``.  With
    ``profile="gaussian"`` each lobe is ``amp * exp(-d^T C^-1 d / 2)``.  With
    ``profile="plateau"`` it is a logistic step that is ``amp`` inside the
    ellipse ``d^T C^-1 d = 1`` and falls off over a relative width ``flank``.
    """
    if profile not in ("gaussian", "plateau"):
        raise ParameterError(f"unknown lobe profile {profile!r}")
    terms = []
    for center, cov, amp in lobes:
        cov = np.asarray(cov, float)
        if cov.shape != (2, 2) or np.any(np.linalg.eigvalsh(cov) <= 0):
            raise ParameterError("lobe covariance must be symmetric positive definite")
        A = np.linalg.inv(cov)
        A = 0.5 * (A + A.T)
        c = (float(center[0]), float(center[1]))
        if profile == "gaussian":
            terms.append(QuadFormTerm(c, tuple(map(tuple, A.tolist())), float(amp)))
        else:
            terms.append(QuadFormTerm(c, tuple(map(tuple, A.tolist())), float(amp), "sigmoid",
                                      1.0, float(flank)))
    tilt = DEFAULT_TILT if tilt is None else float(tilt)
    dom = _domain(domain)
    mid = (0.5 * (dom[0] + dom[1]), 0.5 * (dom[2] + dom[3]))
    terms.append(_tilt_term(tilt, tilt_angle, mid))
    return AnalyticSurface("GaussianBlobSum", dict(lobes=[(tuple(c), np.asarray(v).tolist(), a)
                                                          for c, v, a in lobes],
                                                   tilt=tilt, tilt_angle=tilt_angle,
                                                   profile=profile, flank=flank),
                           dom, tuple(terms))


def make_blob(seed: int, n_lobes: int, domain=None, *, tilt: float | None = None,
              steepness: float = 2.0, profile: str = "gaussian",
              flank: float = 0.15) -> AnalyticSurface:
    """Seeded random blob: ``n_lobes`` anisotropic lobes plus a small tilt.

    Lobes have scales between 6% and 12% of the domain size.  Gaussian lobes
    use the scales as standard deviations and are centred anywhere in the
    central 60% of the domain.  Plateau lobes use them as semi-axes, fall
    off over ``flank`` of the semi-axis and are placed (by rejection
    sampling in the central 70%) so that their flanks do not touch.
    Amplitudes are drawn so the steepest flank of each lobe has slope about
    ``steepness``.
    """
    if not 2 <= n_lobes <= 12:
        raise ParameterError("n_lobes must lie in [2, 12]")
    if profile not in ("gaussian", "plateau"):
        raise ParameterError(f"unknown lobe profile {profile!r}")
    dom = _domain(domain)
    rng = np.random.default_rng(seed)
    size = min(dom[1] - dom[0], dom[3] - dom[2])
    span = 0.6 if profile == "gaussian" else 0.7
    lo = 0.5 * (1 - span)
    lobes, placed = [], []
    for _ in range(n_lobes):
        s1, s2 = size * (0.06 + 0.06 * rng.random(2))
        ang = np.pi * rng.random()
        jitter = 0.6 + 0.8 * rng.random()
        reach = max(s1, s2) * (1 + 3 * flank)
        for _attempt in range(2000):
            cx = dom[0] + (lo + span * rng.random()) * (dom[1] - dom[0])
            cy = dom[2] + (lo + span * rng.random()) * (dom[3] - dom[2])
            if profile == "gaussian" or all(np.hypot(cx - x, cy - y) > reach + r
                                            for x, y, r in placed):
                break
        else:
            raise ParameterError("could not place non-overlapping lobes; use fewer lobes")
        placed.append((cx, cy, reach))
        if profile == "plateau":
            # the logistic slope peaks at 1/4 per unit of its argument, which
            # changes by 1/(flank * semi-axis) per world unit across the flank
            amp = steepness * 4 * flank * min(s1, s2) * jitter
        else:
            amp = steepness * min(s1, s2) * np.sqrt(np.e) * jitter
        R = np.array([[np.cos(ang), -np.sin(ang)], [np.sin(ang), np.cos(ang)]])
        cov = R @ np.diag([s1 * s1, s2 * s2]) @ R.T
        lobes.append(((cx, cy), cov, amp))
    surf = gaussian_blob_sum(lobes, tilt=tilt, domain=dom, profile=profile, flank=flank)
    params = dict(surf.params, seed=int(seed), n_lobes=int(n_lobes), steepness=steepness)
    return AnalyticSurface("GaussianBlobSum", params, dom, surf.terms)


# ---------------------------------------------------------------------------
# derived fields


def normals(s: AnalyticSurface, grid: GridSpec) -> NormalField:
    """Unit normals ``(-f_x, -f_y, 1) / sqrt(1 + |grad f|^2)`` from analytic gradients."""
    X, Y = grid.coords()
    g = s.eval(X, Y).grad
    return NormalField(normal_from_gradient(g), grid.spacing, grid.origin)


def normal_from_gradient(g: np.ndarray) -> np.ndarray:
    g = np.asarray(g, float)
    n = np.concatenate([-g, np.ones(g.shape[:-1] + (1,))], axis=-1)
    return n / np.linalg.norm(n, axis=-1, keepdims=True)


def slant_field(n: NormalField) -> ScalarGrid:
    """Slant ``arccos(n_z)`` in radians (evaluated as ``atan2(|n_xy|, n_z)``)."""
    nn = n.n
    sl = np.arctan2(np.hypot(nn[..., 0], nn[..., 1]), nn[..., 2])
    return ScalarGrid(sl, n.spacing, n.origin, units="radian")


def gaussian_curvature(s: AnalyticSurface, p) -> float:
    j = s.eval(p[0], p[1])
    return float(np.linalg.det(j.hess) / (1.0 + j.grad @ j.grad) ** 2)


def fundamental_forms(grad: np.ndarray, hess: np.ndarray):
    """First and second fundamental forms of the graph ``(x, y, f)``."""
    W = np.sqrt(1.0 + grad @ grad)
    G = np.eye(2) + np.outer(grad, grad)
    B = hess / W
    return G, B, W


def sqrt_first_form(grad: np.ndarray):
    """Symmetric square root of ``G = I + g g^T`` and its inverse (closed form)."""
    gg = grad @ grad
    W = np.sqrt(1.0 + gg)
    if gg == 0:
        return np.eye(2), np.eye(2)
    P = np.outer(grad, grad) / gg
    Gh = np.eye(2) + (W - 1.0) * P
    Gih = np.eye(2) + (1.0 / W - 1.0) * P
    return Gh, Gih


def shape_operator(s: AnalyticSurface, p) -> np.ndarray:
    """Shape operator (``-dN``) in the orthonormal tangent basis ``G^{1/2}``-lifted.

    An image vector ``a`` lifts to ``G^{1/2} a`` in this basis, so
    ``S G^{1/2} a = G^{-1/2} B a``.
    """
    j = s.eval(p[0], p[1])
    G, B, _ = fundamental_forms(j.grad, j.hess)
    _, Gih = sqrt_first_form(j.grad)
    S = Gih @ B @ Gih
    return 0.5 * (S + S.T)
