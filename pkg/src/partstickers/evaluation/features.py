"""Pluggable feature extraction for the Frechet metric.

The default desk-scale extractor projects 16x16 grayscale thumbnails onto a
PCA basis fit on the real set. Distances computed with it are comparable
only within this artifact, never to published numbers computed with a
pretrained backbone. An ``external_embedding`` extractor accepts feature
matrices produced elsewhere (e.g. by a pretrained network) via .npy files.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image

from ..errors import ValidationError
from .fid import FeatureSet
from .metrics import to_gray

THUMB = 16
DEFAULT_DIM = 64


def _thumbnail_vectors(images) -> np.ndarray:
    rows = []
    for img in images:
        gray = to_gray(np.asarray(img))
        thumb = np.asarray(
            Image.fromarray(gray.astype(np.uint8)).resize((THUMB, THUMB), Image.BILINEAR),
            dtype=np.float64,
        )
        rows.append(thumb.reshape(-1) / 255.0)
    return np.stack(rows)


class PixelPCAExtractor:
    """PCA-on-pixels features; the basis is fit on the real image set."""

    extractor_id = "pixel_pca"

    def __init__(self, dim: int = DEFAULT_DIM):
        self.dim = dim
        self.mean: np.ndarray | None = None
        self.components: np.ndarray | None = None  # (feat_dim, dim)

    def fit(self, real_images) -> "PixelPCAExtractor":
        x = _thumbnail_vectors(real_images)
        self.mean = x.mean(axis=0)
        centered = x - self.mean
        # right singular vectors = principal directions
        _, _, vt = np.linalg.svd(centered, full_matrices=False)
        components = vt[: self.dim].T
        if components.shape[1] < self.dim:
            pad = np.zeros((components.shape[0], self.dim - components.shape[1]))
            components = np.hstack([components, pad])
        self.components = components
        return self

    def transform(self, images) -> np.ndarray:
        if self.components is None:
            raise ValidationError("extractor not fitted")
        x = _thumbnail_vectors(images)
        return (x - self.mean) @ self.components


class ExternalEmbeddingExtractor:
    """Features precomputed elsewhere, one .npy matrix per image list."""

    extractor_id = "external_embedding"

    def __init__(self, path: str | Path):
        self.features = np.load(Path(path))

    def transform(self, images) -> np.ndarray:
        if len(images) != self.features.shape[0]:
            raise ValidationError(
                f"embedding file has {self.features.shape[0]} rows for {len(images)} images"
            )
        return self.features


def extract_features(images, extractor) -> FeatureSet:
    if len(images) == 0:
        raise ValidationError("empty image list")
    return FeatureSet(extractor.transform(images), extractor_id=extractor.extractor_id)
