"""Discrete image calculus on sampled grids.

Gradients use central differences (one-sided on the border), Hessians use
second central differences, both scaled to world units.  The flow frame is
``u = grad I / |grad I|`` with ``v`` the +90 degree rotation of ``u``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .surfacegen import ScalarGrid


def _values(I, sigma_pre: float = 0.0) -> np.ndarray:
    v = np.asarray(I.values if isinstance(I, ScalarGrid) else I, float)
    if sigma_pre > 0:
        v = ndimage.gaussian_filter(v, sigma_pre, mode="nearest")
    return v


def _spacing(I) -> float:
    return float(I.spacing) if isinstance(I, ScalarGrid) else 1.0


def rot90(a: np.ndarray) -> np.ndarray:
    """Rotate ``(..., 2)`` vectors by +90 degrees: ``(x, y) -> (-y, x)``."""
    return np.stack([-a[..., 1], a[..., 0]], -1)


def gradient(I, sigma_pre: float = 0.0) -> np.ndarray:
    """``(H, W, 2)`` array of ``(I_x, I_y)`` per world unit."""
    v = _values(I, sigma_pre)
    gy, gx = np.gradient(v, _spacing(I))
    return np.stack([gx, gy], -1)


def hessian(I, sigma_pre: float = 0.0) -> np.ndarray:
    """``(H, W, 2, 2)`` image Hessian.

    Interior entries are the standard second central differences, so the
    trace equals the five-point Laplacian exactly; border rows fall back to
    differentiating the gradient.
    """
    v = _values(I, sigma_pre)
    h = _spacing(I)
    gy, gx = np.gradient(v, h)
    xy, xx = np.gradient(gx, h)
    yy, yx = np.gradient(gy, h)
    Hm = np.empty(v.shape + (2, 2))
    Hm[..., 0, 0] = xx
    Hm[..., 1, 1] = yy
    Hm[..., 0, 1] = Hm[..., 1, 0] = 0.5 * (xy + yx)
    c = v[1:-1, 1:-1]
    Hm[1:-1, 1:-1, 0, 0] = (v[1:-1, 2:] - 2 * c + v[1:-1, :-2]) / h ** 2
    Hm[1:-1, 1:-1, 1, 1] = (v[2:, 1:-1] - 2 * c + v[:-2, 1:-1]) / h ** 2
    cross = (v[2:, 2:] - v[2:, :-2] - v[:-2, 2:] + v[:-2, :-2]) / (4 * h ** 2)
    Hm[1:-1, 1:-1, 0, 1] = Hm[1:-1, 1:-1, 1, 0] = cross
    return Hm


def laplacian5(I) -> np.ndarray:
    """Five-point Laplacian on interior pixels (NaN on the border)."""
    v = _values(I)
    h = _spacing(I)
    out = np.full(v.shape, np.nan)
    out[1:-1, 1:-1] = (v[2:, 1:-1] + v[:-2, 1:-1] + v[1:-1, 2:] + v[1:-1, :-2]
                       - 4 * v[1:-1, 1:-1]) / h ** 2
    return out


def default_eps_grad(I) -> float:
    v = _values(I)
    return 1e-3 * float(v.max() - v.min())


@dataclass(frozen=True, eq=False)
class FlowFrame:
    u: np.ndarray  # (H, W, 2) gradient direction
    v: np.ndarray  # (H, W, 2) isophote direction
    mag: np.ndarray  # |grad I|
    mask: np.ndarray  # valid where |grad I| >= eps
    eps: float


def shading_flow(I, eps_grad: float | None = None, sigma_pre: float = 0.0) -> FlowFrame:
    """Gradient/isophote frame; ``mask`` is false where ``|grad I| < eps_grad``."""
    g = gradient(I, sigma_pre)
    mag = np.hypot(g[..., 0], g[..., 1])
    eps = default_eps_grad(I) if eps_grad is None else float(eps_grad)
    mask = mag >= eps
    mask &= mag > 0
    u = np.zeros_like(g)
    u[mask] = g[mask] / mag[mask, None]
    return FlowFrame(u, rot90(u), mag, mask, eps)


@dataclass(frozen=True, eq=False)
class FrameDerivatives:
    I_uu: np.ndarray
    I_uv: np.ndarray
    I_vv: np.ndarray

    # curve-frame names
    @property
    def I_ww(self) -> np.ndarray:
        return self.I_vv

    @property
    def I_uw(self) -> np.ndarray:
        return self.I_uv


def directional(Hm: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """``a^T H b`` for broadcast ``(..., 2, 2)`` and ``(..., 2)`` arrays."""
    return np.einsum("...i,...ij,...j->...", a, Hm, b)


def frame_second_derivatives(I, frame, sigma_pre: float = 0.0) -> FrameDerivatives:
    """Second derivatives in a flow frame or a curve frame ``(u, w)``.

    Masked pixels of a :class:`FlowFrame` come back as NaN.
    """
    Hm = hessian(I, sigma_pre)
    if isinstance(frame, FlowFrame):
        u, v, mask = frame.u, frame.v, frame.mask
    else:
        u, v = (np.asarray(a, float) for a in frame)
        u = np.broadcast_to(u, Hm.shape[:-1])
        v = np.broadcast_to(v, Hm.shape[:-1])
        mask = np.ones(Hm.shape[:-2], bool)
    out = [directional(Hm, a, b) for a, b in ((u, u), (u, v), (v, v))]
    for o in out:
        o[~mask] = np.nan
    return FrameDerivatives(*out)


def isophote_curvature(I, eps_grad: float | None = None, sigma_pre: float = 0.0) -> np.ndarray:
    """Curvature vector of the level curve through each pixel.

    ``kappa = -(I_vv / |grad I|) u`` points to the centre of the osculating
    circle; masked pixels are NaN.
    """
    fr = shading_flow(I, eps_grad, sigma_pre)
    d = frame_second_derivatives(I, fr, sigma_pre)
    with np.errstate(invalid="ignore", divide="ignore"):
        k = -(d.I_vv / fr.mag)[..., None] * fr.u
    k[~fr.mask] = np.nan
    return k


def bilinear(field: np.ndarray, pts: np.ndarray) -> np.ndarray:
    """Sample ``field[row, col, ...]`` at pixel ``(x, y)`` points (edge-clamped)."""
    pts = np.atleast_2d(np.asarray(pts, float))
    H, W = field.shape[:2]
    x = np.clip(pts[:, 0], 0, W - 1)
    y = np.clip(pts[:, 1], 0, H - 1)
    x0 = np.minimum(np.floor(x).astype(int), W - 2)
    y0 = np.minimum(np.floor(y).astype(int), H - 2)
    fx = x - x0
    fy = y - y0
    ex = (slice(None),) + (None,) * (field.ndim - 2)
    fx, fy = fx[ex], fy[ex]
    return ((1 - fy) * ((1 - fx) * field[y0, x0] + fx * field[y0, x0 + 1])
            + fy * ((1 - fx) * field[y0 + 1, x0] + fx * field[y0 + 1, x0 + 1]))
