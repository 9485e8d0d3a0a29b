"""Pixel-level diagnostics: average images, background neutrality, centering."""

from __future__ import annotations

import numpy as np

from ..errors import ValidationError

BORDER_RING = 8  # width in pixels of the border ring used for neutrality


def to_gray(image: np.ndarray) -> np.ndarray:
    """ITU-R 601 luma; passes 2-D inputs through unchanged."""
    image = np.asarray(image)
    if image.ndim == 2:
        return image.astype(np.float64)
    return image[..., 0] * 0.299 + image[..., 1] * 0.587 + image[..., 2] * 0.114


def average_image(samples) -> np.ndarray:
    """Per-pixel arithmetic mean as float64; use export_image to save it."""
    if len(samples) == 0:
        raise ValidationError("empty sample list")
    arrays = [np.asarray(s, dtype=np.float64) for s in samples]
    if any(a.shape != arrays[0].shape for a in arrays):
        raise ValidationError("samples have differing shapes")
    return np.stack(arrays).mean(axis=0)


def export_image(mean: np.ndarray) -> np.ndarray:
    """Quantize a float image to uint8, rounding half to even."""
    return np.clip(np.round(mean), 0, 255).astype(np.uint8)


def _background_mask(image: np.ndarray, gray, tol: int) -> np.ndarray:
    diff = np.abs(image.astype(np.int16) - np.asarray(gray, dtype=np.int16))
    return (diff <= tol).all(axis=-1)


def background_neutrality(
    image: np.ndarray, gray=(128, 128, 128), tol_per_channel: int = 12
) -> float:
    """Fraction of border-ring pixels within +-tol of the neutral gray."""
    if tol_per_channel < 0:
        raise ValidationError("tolerance must be >= 0")
    image = np.asarray(image)
    h, w = image.shape[:2]
    if h < 2 * BORDER_RING or w < 2 * BORDER_RING:
        raise ValidationError(f"image {w}x{h} too small for a {BORDER_RING}px ring")
    near = _background_mask(image, gray, tol_per_channel)
    ring = np.zeros((h, w), dtype=bool)
    ring[:BORDER_RING, :] = True
    ring[-BORDER_RING:, :] = True
    ring[:, :BORDER_RING] = True
    ring[:, -BORDER_RING:] = True
    return float(near[ring].mean())


def centeredness(image: np.ndarray, gray=(128, 128, 128), tol: int = 12) -> float:
    """Distance in pixels from the non-background centroid to the center.

    Returns +inf when no pixel differs from the background gray.
    """
    image = np.asarray(image)
    foreground = ~_background_mask(image, gray, tol)
    ys, xs = np.nonzero(foreground)
    if ys.size == 0:
        return float("inf")
    h, w = image.shape[:2]
    cy, cx = (h - 1) / 2.0, (w - 1) / 2.0
    return float(np.hypot(ys.mean() - cy, xs.mean() - cx))
