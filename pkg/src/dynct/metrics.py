"""Quantitative evaluation of reconstructions: relative errors in
configurable Bochner norms, single-scale SSIM and PSNR averaged over
frames, collected into a serializable report.

SSIM uses the classic 11-tap Gaussian window with sigma 1.5 and stabilizers
(0.01 L)^2, (0.03 L)^2 for data range L = 1; PSNR uses peak 1.  The exact
metric variants behind published tables are rarely stated, so comparisons
against them should use generous tolerances.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy.ndimage import correlate1d

from .geometry import GridFunction, bochner_norm
from .radon import Volume, pixel_centers


@dataclass
class MetricReport:
    rel_l2_error: float  # percent
    rel_error_in_norm: float  # percent, in the configured (outer, inner) norm
    mean_ssim: float
    mean_psnr: float  # dB, math.inf for an exact match
    discrepancy: float
    iterations: int

    def to_dict(self) -> dict:
        return asdict(self)


def _volume_gf(vol: Volume) -> GridFunction:
    tw = np.full(vol.n_time, vol.T / vol.n_time)
    return GridFunction(vol.values, tw, np.asarray(vol.pixel_size**2))


def relative_error(
    reco: Volume, truth: Volume, outer: float = 2.0, inner: float = 2.0
) -> float:
    """100 * ||reco - truth|| / ||truth|| in the (outer, inner) Bochner norm.

    Both volumes must share the grid; resample the ground truth first when
    it was generated at a different resolution.
    """
    if reco.values.shape != truth.values.shape:
        raise ValueError(
            f"grids differ: {reco.values.shape} vs {truth.values.shape}; "
            "resample the ground truth onto the reconstruction grid"
        )
    denom = bochner_norm(_volume_gf(truth), outer, inner)
    if denom == 0.0:
        raise ValueError("relative error undefined for zero ground truth")
    diff = Volume(reco.values - truth.values, extent=truth.extent, T=truth.T)
    return 100.0 * bochner_norm(_volume_gf(diff), outer, inner) / denom


def resample_volume(vol: Volume, n_target: int) -> Volume:
    """Bilinear per-frame resampling onto an n_target^2 cell-center grid."""
    if n_target == vol.n_pixels:
        return vol.copy()
    src = pixel_centers(vol.n_pixels, vol.extent)
    dst = pixel_centers(n_target, vol.extent)
    h = src[1] - src[0] if len(src) > 1 else 1.0
    f = (dst - src[0]) / h
    i0 = np.clip(np.floor(f).astype(int), 0, len(src) - 2)
    t = np.clip(f - i0, 0.0, 1.0)

    def interp_axis(arr, axis):
        a0 = np.take(arr, i0, axis=axis)
        a1 = np.take(arr, i0 + 1, axis=axis)
        shape = [1] * arr.ndim
        shape[axis] = -1
        tt = t.reshape(shape)
        return (1.0 - tt) * a0 + tt * a1

    out = interp_axis(interp_axis(vol.values, 1), 2)
    return Volume(out, extent=vol.extent, T=vol.T)


_SSIM_WINDOW = 11
_SSIM_SIGMA = 1.5
_SSIM_K1 = 0.01
_SSIM_K2 = 0.03


def _gaussian_window(size: int = _SSIM_WINDOW, sigma: float = _SSIM_SIGMA) -> np.ndarray:
    x = np.arange(size) - (size - 1) / 2.0
    w = np.exp(-(x**2) / (2.0 * sigma**2))
    return w / w.sum()


def _local_mean(img: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    out = correlate1d(img, kernel, axis=0, mode="mirror")
    return correlate1d(out, kernel, axis=1, mode="mirror")


def ssim_frame(a: np.ndarray, b: np.ndarray, data_range: float = 1.0) -> float:
    """Single-scale SSIM of two frames (Gaussian window, mirrored borders)."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ValueError("frame shapes differ")
    k = _gaussian_window()
    c1 = (_SSIM_K1 * data_range) ** 2
    c2 = (_SSIM_K2 * data_range) ** 2
    mu_a = _local_mean(a, k)
    mu_b = _local_mean(b, k)
    var_a = _local_mean(a * a, k) - mu_a**2
    var_b = _local_mean(b * b, k) - mu_b**2
    cov = _local_mean(a * b, k) - mu_a * mu_b
    num = (2 * mu_a * mu_b + c1) * (2 * cov + c2)
    den = (mu_a**2 + mu_b**2 + c1) * (var_a + var_b + c2)
    return float(np.mean(num / den))


def ssim_mean(reco: Volume, truth: Volume) -> float:
    """SSIM per frame, averaged uniformly over time."""
    if reco.values.shape != truth.values.shape:
        raise ValueError("grids differ")
    return float(
        np.mean([ssim_frame(reco.values[k], truth.values[k]) for k in range(reco.n_time)])
    )


def psnr_mean(reco: Volume, truth: Volume, peak: float = 1.0) -> float:
    """PSNR per frame in dB (peak 1), averaged over time; inf on exact match."""
    if reco.values.shape != truth.values.shape:
        raise ValueError("grids differ")
    vals = []
    for k in range(reco.n_time):
        mse = float(np.mean((reco.values[k] - truth.values[k]) ** 2))
        if mse == 0.0:
            return math.inf
        vals.append(10.0 * math.log10(peak**2 / mse))
    return float(np.mean(vals))
