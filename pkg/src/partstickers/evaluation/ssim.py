"""Structural similarity with the standard 11-tap Gaussian window."""

from __future__ import annotations

import numpy as np
from scipy.ndimage import correlate1d

from ..errors import ValidationError

WINDOW_SIZE = 11
WINDOW_SIGMA = 1.5
K1 = 0.01
K2 = 0.03


def _gaussian_kernel() -> np.ndarray:
    half = WINDOW_SIZE // 2
    xs = np.arange(-half, half + 1, dtype=np.float64)
    k = np.exp(-(xs**2) / (2.0 * WINDOW_SIGMA**2))
    return k / k.sum()


_KERNEL = _gaussian_kernel()


def _local_mean(a: np.ndarray) -> np.ndarray:
    out = correlate1d(a, _KERNEL, axis=0, mode="reflect")
    return correlate1d(out, _KERNEL, axis=1, mode="reflect")


def ssim(a: np.ndarray, b: np.ndarray, data_range: float = 255.0) -> float:
    """Mean local SSIM between two grayscale images, on a -1..1 scale."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 2:
        raise ValidationError(f"need equal 2-D shapes, got {a.shape} vs {b.shape}")

    c1 = (K1 * data_range) ** 2
    c2 = (K2 * data_range) ** 2

    mu_a = _local_mean(a)
    mu_b = _local_mean(b)
    var_a = _local_mean(a * a) - mu_a * mu_a
    var_b = _local_mean(b * b) - mu_b * mu_b
    cov = _local_mean(a * b) - mu_a * mu_b

    num = (2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2)
    den = (mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2)
    ssim_map = num / den

    # drop the window-radius border so every retained value sees full support
    half = WINDOW_SIZE // 2
    if ssim_map.shape[0] > 2 * half and ssim_map.shape[1] > 2 * half:
        ssim_map = ssim_map[half:-half, half:-half]
    return float(ssim_map.mean())
