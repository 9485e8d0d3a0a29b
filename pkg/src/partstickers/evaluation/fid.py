"""Frechet distance between Gaussian fits of two feature sets."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import PartStickersError, ValidationError

EIG_CLAMP_TOL = 1e-8


@dataclass
class FeatureSet:
    features: np.ndarray  # (n, d)
    extractor_id: str = "unknown"

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        if self.features.ndim != 2:
            raise ValidationError("features must be a 2-D (n, d) matrix")
        if not np.isfinite(self.features).all():
            raise ValidationError("features contain non-finite values")

    @property
    def n(self) -> int:
        return self.features.shape[0]

    def moments(self) -> tuple[np.ndarray, np.ndarray]:
        if self.n < 2:
            raise ValidationError("need at least 2 samples for a covariance")
        mu = self.features.mean(axis=0)
        sigma = np.cov(self.features, rowvar=False)
        return mu, np.atleast_2d(sigma)


def _sqrtm_psd(m: np.ndarray) -> np.ndarray:
    """Symmetric PSD square root via eigendecomposition.

    Eigenvalues slightly below zero (within the clamp tolerance, scaled by
    the matrix magnitude) are treated as zero; anything more negative is a
    conditioning failure.
    """
    m = (m + m.T) / 2.0
    vals, vecs = np.linalg.eigh(m)
    floor = -EIG_CLAMP_TOL * max(1.0, float(np.abs(vals).max(initial=1.0)))
    if vals.min(initial=0.0) < floor:
        raise PartStickersError(
            f"matrix square root not PSD: min eigenvalue {vals.min():.3e}, "
            f"max {vals.max():.3e}"
        )
    vals = np.clip(vals, 0.0, None)
    return (vecs * np.sqrt(vals)) @ vecs.T


def fid_from_moments(
    mu1: np.ndarray, sigma1: np.ndarray, mu2: np.ndarray, sigma2: np.ndarray
) -> float:
    """||mu1-mu2||^2 + Tr(S1 + S2 - 2 (S1 S2)^{1/2}).

    The cross term is computed as Tr((S1^{1/2} S2 S1^{1/2})^{1/2}) for
    numerical stability.
    """
    mu1 = np.atleast_1d(np.asarray(mu1, dtype=np.float64))
    mu2 = np.atleast_1d(np.asarray(mu2, dtype=np.float64))
    sigma1 = np.atleast_2d(np.asarray(sigma1, dtype=np.float64))
    sigma2 = np.atleast_2d(np.asarray(sigma2, dtype=np.float64))
    if mu1.shape != mu2.shape or sigma1.shape != sigma2.shape:
        raise ValidationError("moment shapes disagree")

    diff = mu1 - mu2
    s1_half = _sqrtm_psd(sigma1)
    cross = _sqrtm_psd(s1_half @ sigma2 @ s1_half)
    value = float(diff @ diff + np.trace(sigma1) + np.trace(sigma2) - 2.0 * np.trace(cross))
    if not np.isfinite(value):
        raise PartStickersError(
            "non-finite distance; covariance conditioning: "
            f"cond(S1)={np.linalg.cond(sigma1):.3e}, cond(S2)={np.linalg.cond(sigma2):.3e}"
        )
    return value


def fid(real: FeatureSet, gen: FeatureSet) -> float:
    if real.features.shape[1] != gen.features.shape[1]:
        raise ValidationError(
            f"feature dimensions disagree: {real.features.shape[1]} vs {gen.features.shape[1]}"
        )
    mu1, s1 = real.moments()
    mu2, s2 = gen.moments()
    return fid_from_moments(mu1, s1, mu2, s2)
