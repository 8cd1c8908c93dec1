"""Deterministic dynamic test phantoms and Gaussian sinogram noise.

Both phantoms live on [0,1] x [-1,1]^2 with 20 frames by default and values
in [0, 1]; frames are generated by inverse-map sampling of an analytic
template (no forward splatting).  Shape positions and sizes are fixed,
documented constants: the source material describes the scenes only
qualitatively, so table-level comparisons are tolerance based.

* intensity-preserving: two rectangles and a circle stretched vertically by
  the factor 1.5 over [0, 1] via Phi(t, x1, x2) = (x1, (1 + t/2) x2),
  theta(t, x) = template(Gamma(t, x)) with Gamma = Phi^{-1}.
* mass-preserving: a static circle plus a translating rectangle that grows
  while its intensity scales with 1/area, so area * intensity is constant.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .geometry import GridFunction, bochner_norm
from .radon import Sinogram, Volume, disk_mask, pixel_centers

# intensity phantom template, coordinates (x1, x2) in the unit square;
# shapes sit off the stretch axis so the motion is clearly visible,
# while staying inside the unit disk for every t in [0, 1]
INTENSITY_CIRCLE = ((0.35, -0.40), 0.21, 1.0)  # center, radius, value
INTENSITY_RECTS = (
    ((-0.65, -0.20, -0.50, -0.22), 0.8),  # (x0, x1, y0, y1), value
    ((-0.14, 0.14, 0.26, 0.56), 0.6),
)
STRETCH_RATE = 0.5  # vertical scale 1 + STRETCH_RATE * t

# mass phantom: static circle and a moving, growing rectangle; shapes stay
# disjoint and inside the unit disk for every t in [0, 1]
MASS_CIRCLE = ((-0.48, 0.40), 0.26, 0.75)
MASS_RECT_CENTER0 = np.array([0.35, -0.40])
MASS_RECT_CENTER1 = np.array([0.0, 0.07])
MASS_RECT_HALF0 = np.array([0.18, 0.13])
MASS_GROWTH_RATE = 0.25  # half-sizes scale with 1 + MASS_GROWTH_RATE * t
MASS_RECT_VALUE0 = 0.85

SUPERSAMPLE = 4  # subsamples per pixel edge for antialiased rasterization


@dataclass(frozen=True)
class MotionModel:
    """Forward map Phi, its inverse Gamma and the velocity dPhi/dt.

    All callables take (t, points) with points of shape (..., 2) and return
    arrays of the same shape.
    """

    kind: str  # "mass_preserving" | "intensity_preserving"
    phi: Callable[[float, np.ndarray], np.ndarray]
    gamma: Callable[[float, np.ndarray], np.ndarray]
    velocity: Callable[[float, np.ndarray], np.ndarray]


def intensity_motion() -> MotionModel:
    """Vertical stretch Phi(t, x) = (x1, (1 + t/2) x2); V = (0, x2/2)."""

    def phi(t, pts):
        out = np.array(pts, dtype=float, copy=True)
        out[..., 1] *= 1.0 + STRETCH_RATE * t
        return out

    def gamma(t, pts):
        out = np.array(pts, dtype=float, copy=True)
        out[..., 1] /= 1.0 + STRETCH_RATE * t
        return out

    def velocity(t, pts):
        out = np.zeros_like(np.asarray(pts, dtype=float))
        out[..., 1] = STRETCH_RATE * np.asarray(pts, dtype=float)[..., 1]
        return out

    return MotionModel("intensity_preserving", phi, gamma, velocity)


def _mass_rect_state(t: float) -> tuple[np.ndarray, np.ndarray, float]:
    scale = 1.0 + MASS_GROWTH_RATE * t
    center = MASS_RECT_CENTER0 + t * (MASS_RECT_CENTER1 - MASS_RECT_CENTER0)
    half = MASS_RECT_HALF0 * scale
    value = MASS_RECT_VALUE0 / scale**2  # mass = value * area stays constant
    return center, half, value


def mass_motion() -> MotionModel:
    """Affine rectangle motion y -> c(t) + s(t) (y - c(0)); zero inside the
    static circle (that component does not move)."""

    c0 = MASS_RECT_CENTER0
    (ccx, ccy), cr, _ = MASS_CIRCLE

    def _scale(t):
        return 1.0 + MASS_GROWTH_RATE * t

    def phi(t, pts):
        center, _, _ = _mass_rect_state(t)
        return center + _scale(t) * (np.asarray(pts, dtype=float) - c0)

    def gamma(t, pts):
        center, _, _ = _mass_rect_state(t)
        return c0 + (np.asarray(pts, dtype=float) - center) / _scale(t)

    def velocity(t, pts):
        pts = np.asarray(pts, dtype=float)
        center, _, _ = _mass_rect_state(t)
        drift = MASS_RECT_CENTER1 - MASS_RECT_CENTER0
        out = drift + (MASS_GROWTH_RATE / _scale(t)) * (pts - center)
        static = (pts[..., 0] - ccx) ** 2 + (pts[..., 1] - ccy) ** 2 <= cr**2
        out = np.where(static[..., None], 0.0, out)
        return out

    return MotionModel("mass_preserving", phi, gamma, velocity)


def _fine_grid(resolution: int, ss: int = SUPERSAMPLE) -> tuple[np.ndarray, np.ndarray]:
    c = pixel_centers(resolution * ss)
    return np.meshgrid(c, c, indexing="xy")


def _block_mean(fine: np.ndarray, resolution: int, ss: int = SUPERSAMPLE) -> np.ndarray:
    return fine.reshape(resolution, ss, resolution, ss).mean(axis=(1, 3))


def intensity_template(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Template of the intensity phantom, evaluated pointwise."""
    out = np.zeros_like(x, dtype=float)
    for (x0, x1, y0, y1), val in INTENSITY_RECTS:
        inside = (x >= x0) & (x <= x1) & (y >= y0) & (y <= y1)
        out = np.maximum(out, np.where(inside, val, 0.0))
    (cx, cy), rad, val = INTENSITY_CIRCLE
    inside = (x - cx) ** 2 + (y - cy) ** 2 <= rad**2
    return np.maximum(out, np.where(inside, val, 0.0))


def phantom_times(n_time: int, T: float = 1.0) -> np.ndarray:
    """Frame times: n_time equidistant steps including both endpoints."""
    if n_time < 1:
        raise ValueError("n_time must be >= 1")
    if n_time == 1:
        return np.zeros(1)
    return np.linspace(0.0, T, n_time)


def intensity_phantom(n_time: int = 20, resolution: int = 41) -> Volume:
    """Intensity-preserving phantom, antialiased on an n x n grid."""
    motion = intensity_motion()
    xf, yf = _fine_grid(resolution)
    mask = disk_mask(resolution)  # operator domain is the unit disk
    frames = np.empty((n_time, resolution, resolution))
    for k, t in enumerate(phantom_times(n_time)):
        pts = np.stack([xf, yf], axis=-1)
        back = motion.gamma(t, pts)
        fine = intensity_template(back[..., 0], back[..., 1])
        frames[k] = _block_mean(fine, resolution) * mask
    return Volume(frames, T=1.0)


def _rect_coverage(resolution: int, x0, x1, y0, y1) -> np.ndarray:
    """Exact pixel coverage fraction of an axis-aligned rectangle."""
    h = 2.0 / resolution
    edges = -1.0 + np.arange(resolution + 1) * h
    lo, hi = edges[:-1], edges[1:]
    ox = np.clip(np.minimum(hi, x1) - np.maximum(lo, x0), 0.0, None) / h
    oy = np.clip(np.minimum(hi, y1) - np.maximum(lo, y0), 0.0, None) / h
    return np.outer(oy, ox)


def mass_phantom(n_time: int = 20, resolution: int = 83) -> Volume:
    """Mass-preserving phantom: the moving rectangle is rasterized with
    exact cell coverage, so its discrete mass is constant to rounding."""
    (cx, cy), rad, cval = MASS_CIRCLE
    xf, yf = _fine_grid(resolution)
    mask = disk_mask(resolution)
    circle = _block_mean(
        np.where((xf - cx) ** 2 + (yf - cy) ** 2 <= rad**2, cval, 0.0), resolution
    )
    frames = np.empty((n_time, resolution, resolution))
    for k, t in enumerate(phantom_times(n_time)):
        center, half, value = _mass_rect_state(t)
        cov = _rect_coverage(
            resolution,
            center[0] - half[0],
            center[0] + half[0],
            center[1] - half[1],
            center[1] + half[1],
        )
        frames[k] = (circle + value * cov) * mask
    return Volume(frames, T=1.0)


def draw_noise(shape: tuple[int, ...], std: float, seed: int) -> np.ndarray:
    """Seeded i.i.d. Gaussian noise array (zero mean, given std)."""
    if std < 0:
        raise ValueError("std must be nonnegative")
    if std == 0.0:
        return np.zeros(shape)
    rng = np.random.default_rng(seed)
    return std * rng.standard_normal(shape)


def noise_level(noise: np.ndarray, geometry, outer: float = 2.0, s: float = 2.0) -> float:
    """||noise|| in the (outer, s) weighted data norm of the geometry."""
    if not np.any(noise):
        return 0.0
    gf = GridFunction(noise, geometry.time_weights, geometry.data_weights(s))
    return float(bochner_norm(gf, outer, s))


def add_noise(
    sino: Sinogram, std: float, seed: int, outer: float = 2.0
) -> tuple[Sinogram, float]:
    """Add i.i.d. Gaussian noise and return the perturbed sinogram together
    with the noise level delta = ||noise|| in the (outer, s) data norm used
    by the discrepancy rule.  Deterministic for a fixed seed."""
    noise = draw_noise(sino.values.shape, std, seed)
    delta = noise_level(noise, sino.geometry, outer, sino.exponent_s)
    return Sinogram(sino.values + noise, sino.geometry, sino.exponent_s), delta
