"""Pointwise rendering ``I = F(N)`` and contour-blur image sequences."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import ndimage

from .surfacegen import GridSpec, NormalField, ParameterError, ScalarGrid

log = logging.getLogger(__name__)

VARIANTS = ("Lambertian", "Specular", "SlantImage", "MonotoneOfCos")
VIEW = np.array([0.0, 0.0, 1.0])
SHADOW_WARN_FRACTION = 0.5


def unit_light(L) -> np.ndarray:
    L = np.asarray(L, float)
    n = np.linalg.norm(L)
    if L.shape != (3,) or n == 0:
        raise ParameterError("light must be a non-zero 3-vector")
    return L / n


def power_profile(p: float) -> Callable[[np.ndarray], np.ndarray]:
    """``g(c) = max(c, 0) ** p``; monotone, and concave for ``0 < p <= 1``."""
    if not p > 0:
        raise ParameterError("profile exponent must be positive")

    def g(c):
        return np.maximum(c, 0.0) ** p

    g.__name__ = f"power({p:g})"
    return g


@dataclass(frozen=True, eq=False)
class RenderSpec:
    """Rendering function applied pointwise to the normal field.

    ``lights`` lists additional ``(L, weight)`` sources for Lambertian sums;
    the primary light ``L`` always has weight ``albedo``.
    """

    variant: str
    L: tuple[float, float, float] = (0.0, 0.0, 1.0)
    albedo: float = 1.0
    exponent: float = 20.0
    diffuse: float = 0.7
    specular: float = 0.3
    profile: Callable | None = None
    lights: tuple = ()
    name: str = ""

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ParameterError(f"unknown render variant {self.variant!r}")
        L = np.asarray(self.L, float)
        if L.shape != (3,) or abs(np.linalg.norm(L) - 1.0) > 1e-9:
            raise ParameterError("L must be a unit 3-vector")
        if L[2] <= 0:
            raise ParameterError("light must lie in the front hemisphere (L_z > 0)")
        if not 0 < self.albedo <= 1:
            raise ParameterError("albedo must lie in (0, 1]")
        if self.variant == "Specular":
            if self.exponent < 1:
                raise ParameterError("specular exponent must be >= 1")
            if self.diffuse < 0 or self.specular < 0 or self.diffuse + self.specular > 1 + 1e-12:
                raise ParameterError("specular weights must be nonnegative with sum <= 1")
        if self.variant == "MonotoneOfCos" and self.profile is None:
            object.__setattr__(self, "profile", power_profile(0.5))
        for Lk, w in self.lights:
            if w < 0 or unit_light(Lk)[2] <= 0:
                raise ParameterError("extra lights need L_z > 0 and nonnegative weight")
        object.__setattr__(self, "L", tuple(float(c) for c in L))

    @classmethod
    def lambertian(cls, L, albedo: float = 1.0, **kw) -> "RenderSpec":
        return cls("Lambertian", tuple(unit_light(L)), albedo, **kw)

    @classmethod
    def specular_blend(cls, L, exponent: float = 20.0, diffuse: float = 0.7,
                       specular: float = 0.3, **kw) -> "RenderSpec":
        return cls("Specular", tuple(unit_light(L)), 1.0, exponent, diffuse, specular, **kw)

    @classmethod
    def slant(cls, **kw) -> "RenderSpec":
        return cls("SlantImage", **kw)

    @classmethod
    def monotone_of_cos(cls, L, profile=None, **kw) -> "RenderSpec":
        return cls("MonotoneOfCos", tuple(unit_light(L)), profile=profile, **kw)

    def label(self) -> str:
        return self.name or self.variant

    def shade(self, n: np.ndarray) -> np.ndarray:
        """Unclamped rendering function on an ``(..., 3)`` array of unit normals."""
        L = np.asarray(self.L)
        c = n @ L
        if self.variant == "Lambertian":
            I = self.albedo * np.maximum(c, 0.0)
            for Lk, w in self.lights:
                I = I + w * np.maximum(n @ unit_light(Lk), 0.0)
            return I
        if self.variant == "Specular":
            h = unit_light(L + VIEW)
            lobe = np.maximum(n @ h, 0.0) ** self.exponent
            return self.diffuse * np.maximum(c, 0.0) + self.specular * lobe
        if self.variant == "SlantImage":
            return np.arctan2(np.hypot(n[..., 0], n[..., 1]), n[..., 2]) / (0.5 * np.pi)
        return self.profile(c)


def render(n: NormalField, spec: RenderSpec) -> ScalarGrid:
    """Render a normal field; output clamped to ``[0, 1]``.

    ``meta`` records the attached-shadow fraction and sets
    ``shadow_warning`` when it exceeds one half.
    """
    nn = n.n
    I = np.clip(spec.shade(nn), 0.0, 1.0)
    meta = {"render": spec.label()}
    if spec.variant != "SlantImage":
        frac = float(np.mean(nn @ np.asarray(spec.L) <= 0.0))
        meta["shadow_fraction"] = frac
        meta["shadow_warning"] = frac > SHADOW_WARN_FRACTION
        if meta["shadow_warning"]:
            log.warning("attached shadows cover %.0f%% of the image", 100 * frac)
    return ScalarGrid(I, n.spacing, n.origin, units="intensity", meta=meta)


@dataclass(frozen=True)
class AdmissibilityReport:
    n_maxima: int
    maxima: tuple  # unit normals at the maxima
    bv_ratio: float  # max |grad I| / |grad n| on the sphere image
    admissible: bool


def sphere_normals(resolution: int = 201, rim: float = 0.97) -> tuple[np.ndarray, np.ndarray]:
    """Normals of the visible unit hemisphere on a ``resolution``-square image."""
    t = np.linspace(-1.0, 1.0, resolution)
    X, Y = np.meshgrid(t, t)
    r2 = X * X + Y * Y
    inside = r2 < rim * rim
    Z = np.sqrt(np.clip(1.0 - r2, 0.0, None))
    return np.stack([X, Y, Z], -1), inside


def admissibility_probe(spec: RenderSpec, resolution: int = 201) -> AdmissibilityReport:
    """Count strict sphere-image maxima and estimate the bounded-variation ratio."""
    n, inside = sphere_normals(resolution)
    I = np.clip(spec.shade(n), 0.0, 1.0)
    I = np.where(inside, I, -np.inf)
    core = I[1:-1, 1:-1]
    strict = np.ones(core.shape, bool)
    for di in (-1, 0, 1):
        for dj in (-1, 0, 1):
            if di or dj:
                strict &= core > I[1 + di:I.shape[0] - 1 + di, 1 + dj:I.shape[1] - 1 + dj]
    strict &= inside[1:-1, 1:-1] & np.isfinite(core)
    idx = np.argwhere(strict) + 1
    maxima = tuple(tuple(n[i, j]) for i, j in idx)

    h = 2.0 / (resolution - 1)
    Ic = np.where(inside, I, 0.0)
    gy, gx = np.gradient(Ic, h)
    dn = np.zeros(I.shape)
    for k in range(3):
        ny, nx = np.gradient(n[..., k], h)
        dn += nx * nx + ny * ny
    ok = ndimage.binary_erosion(inside, iterations=2)
    ratio = float(np.max(np.hypot(gx, gy)[ok] / np.sqrt(dn[ok])))
    return AdmissibilityReport(len(maxima), maxima, ratio, len(maxima) == 1)


# ---------------------------------------------------------------------------
# contour blur


@dataclass(frozen=True, eq=False)
class BlurSequence:
    """Weighted base contour with a strictly decreasing blur schedule (pixels)."""

    polyline: np.ndarray  # (n, 2) pixel (x, y)
    profile: np.ndarray  # intensity per vertex
    sigmas: tuple[float, ...]
    closed: bool = False
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        P = np.array(self.polyline, float)
        w = np.array(self.profile, float)
        if P.ndim != 2 or P.shape[1] != 2 or P.shape[0] < 2 or w.shape != (P.shape[0],):
            raise ParameterError("polyline must be (n >= 2, 2) with one profile value per vertex")
        if self.arclength_of(P, self.closed) <= 0:
            raise ParameterError("contour has zero length")
        s = tuple(float(x) for x in self.sigmas)
        if any(x <= 0 for x in s) or any(b >= a for a, b in zip(s, s[1:])):
            raise ParameterError("sigma schedule must be positive and strictly decreasing")
        if not self.closed and (w[0] != 0 or w[-1] != 0):
            raise ParameterError("open contours must carry zero intensity at the endpoints")
        P.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "polyline", P)
        object.__setattr__(self, "profile", w)
        object.__setattr__(self, "sigmas", s)

    @staticmethod
    def arclength_of(P, closed=False) -> float:
        Q = np.vstack([P, P[:1]]) if closed else P
        return float(np.sum(np.hypot(*np.diff(Q, axis=0).T)))

    @property
    def length(self) -> float:
        return self.arclength_of(self.polyline, self.closed)

    def vertices(self) -> np.ndarray:
        return np.vstack([self.polyline, self.polyline[:1]]) if self.closed else self.polyline

    @classmethod
    def circle(cls, center, radius: float, sigmas, intensity: float = 1.0,
               n: int = 720) -> "BlurSequence":
        t = 2 * np.pi * np.arange(n) / n
        P = np.column_stack([center[0] + radius * np.cos(t), center[1] + radius * np.sin(t)])
        return cls(P, np.full(n, float(intensity)), tuple(sigmas), closed=True,
                   meta={"shape": "circle", "center": tuple(center), "radius": radius})

    @classmethod
    def segment(cls, p0, p1, sigmas, intensity: float = 1.0, n: int = 401,
                dip: float = 0.0) -> "BlurSequence":
        """Straight segment with a ``sin`` intensity profile vanishing at both ends.

        ``dip > 0`` multiplies by ``1 - dip * sin^2`` which, past ``dip = 1/3``,
        splits the single hump into two with a saddle at the midpoint.
        """
        if not 0 <= dip < 1:
            raise ParameterError("dip must lie in [0, 1)")
        t = np.linspace(0.0, 1.0, n)
        P = np.outer(1 - t, p0) + np.outer(t, p1)
        sn = np.sin(np.pi * t)
        w = intensity * sn * (1 - dip * sn ** 2)
        w[0] = w[-1] = 0.0
        return cls(P, w, tuple(sigmas), meta={"shape": "segment", "p0": tuple(p0), "p1": tuple(p1)})

    def resample(self, step: float = 0.05) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Dense midpoint samples: positions, intensity, arclength element."""
        V = self.vertices()
        w = np.append(self.profile, self.profile[0]) if self.closed else self.profile
        pts, ws, ds = [], [], []
        for a, b, wa, wb in zip(V[:-1], V[1:], w[:-1], w[1:]):
            L = float(np.hypot(*(b - a)))
            if L == 0:
                continue
            k = max(1, int(np.ceil(L / step)))
            t = (np.arange(k) + 0.5) / k
            pts.append(a + np.outer(t, b - a))
            ws.append(wa + t * (wb - wa))
            ds.append(np.full(k, L / k))
        return np.vstack(pts), np.concatenate(ws), np.concatenate(ds)


def gaussian_kernel1d(sigma: float) -> np.ndarray:
    r = int(np.floor(3.0 * sigma))
    x = np.arange(-r, r + 1)
    k = np.exp(-0.5 * (x / sigma) ** 2)
    return k / k.sum()


def blur_masses(points, masses, sigma: float, canvas: GridSpec) -> ScalarGrid:
    """Splat point masses bilinearly and convolve with a 3-sigma truncated Gaussian.

    ``points`` and ``sigma`` are in world units.  Values are densities (mass
    per world unit squared), so ``sum(values) * spacing**2`` equals the total
    mass as long as the support stays on the canvas.
    """
    if not sigma > 0:
        raise ParameterError("sigma must be positive")
    P = canvas.to_pixel(np.atleast_2d(np.asarray(points, float)))
    m = np.asarray(masses, float).ravel()
    H, W = canvas.shape
    s = sigma / canvas.spacing
    margin = 3.0 * s
    if (P[:, 0].min() < margin or P[:, 1].min() < margin
            or P[:, 0].max() > W - 1 - margin or P[:, 1].max() > H - 1 - margin):
        raise ParameterError(f"contour must keep a margin of 3*sigma = {3 * sigma:g} from the canvas edge")
    x0 = np.floor(P[:, 0]).astype(int)
    y0 = np.floor(P[:, 1]).astype(int)
    fx = P[:, 0] - x0
    fy = P[:, 1] - y0
    acc = np.zeros(H * W)
    for dy, wy in ((0, 1 - fy), (1, fy)):
        for dx, wx in ((0, 1 - fx), (1, fx)):
            yy = np.minimum(y0 + dy, H - 1)
            xx = np.minimum(x0 + dx, W - 1)
            acc += np.bincount(yy * W + xx, weights=m * wy * wx, minlength=H * W)
    k = gaussian_kernel1d(s)
    img = ndimage.correlate1d(acc.reshape(H, W), k, axis=0, mode="constant")
    img = ndimage.correlate1d(img, k, axis=1, mode="constant")
    return ScalarGrid(img / canvas.spacing ** 2, canvas.spacing, canvas.origin,
                      units="intensity", meta={"sigma": float(sigma)})


def blur_contour(seq: BlurSequence, sigma: float, canvas: GridSpec, step: float = 0.05) -> ScalarGrid:
    """Rasterise the weighted contour (mass = intensity x arclength) and blur it."""
    pts, w, ds = seq.resample(step)
    return blur_masses(pts, w * ds, sigma, canvas)
