"""Noise schedule and the forward corruption process."""

from __future__ import annotations

from dataclasses import dataclass

import torch

from ..errors import ValidationError


@dataclass(frozen=True)
class NoiseSchedule:
    """Per-step noise variances and their derived cumulative products.

    ``betas[t-1]`` is the variance added at step t (1-indexed steps).
    ``alpha_bars`` has length T+1 with ``alpha_bars[0] == 1`` (empty product),
    so index t gives the total signal retention after t steps.
    """

    betas: torch.Tensor  # (T,) float64
    alphas: torch.Tensor  # (T,) float64
    alpha_bars: torch.Tensor  # (T+1,) float64

    @property
    def T(self) -> int:
        return self.betas.shape[0]

    def beta(self, t: int) -> float:
        self._check_t(t)
        return float(self.betas[t - 1])

    def alpha(self, t: int) -> float:
        self._check_t(t)
        return float(self.alphas[t - 1])

    def alpha_bar(self, t: int) -> float:
        if not 0 <= t <= self.T:
            raise ValidationError(f"timestep {t} outside [0, {self.T}]")
        return float(self.alpha_bars[t])

    def posterior_variance(self, t: int) -> float:
        """Variance of the reverse-step noise at step t."""
        self._check_t(t)
        ab_t = float(self.alpha_bars[t])
        ab_prev = float(self.alpha_bars[t - 1])
        return self.beta(t) * (1.0 - ab_prev) / (1.0 - ab_t)

    def _check_t(self, t: int) -> None:
        if not 1 <= t <= self.T:
            raise ValidationError(f"timestep {t} outside [1, {self.T}]")


def make_schedule(
    T: int,
    beta_start: float = 1e-4,
    beta_end: float = 0.02,
    kind: str = "linear",
) -> NoiseSchedule:
    if kind != "linear":
        raise ValidationError(f"unknown schedule kind {kind!r}")
    if T < 1:
        raise ValidationError("T must be >= 1")
    if not (0.0 < beta_start <= beta_end < 1.0):
        raise ValidationError(
            f"betas must satisfy 0 < start <= end < 1, got ({beta_start}, {beta_end})"
        )
    betas = torch.linspace(beta_start, beta_end, T, dtype=torch.float64)
    alphas = 1.0 - betas
    alpha_bars = torch.cat(
        [torch.ones(1, dtype=torch.float64), torch.cumprod(alphas, dim=0)]
    )
    return NoiseSchedule(betas=betas, alphas=alphas, alpha_bars=alpha_bars)


def forward_step(
    x_prev: torch.Tensor, t: int, noise: torch.Tensor, schedule: NoiseSchedule
) -> torch.Tensor:
    """One step of the forward corruption kernel."""
    beta = schedule.beta(t)
    return (1.0 - beta) ** 0.5 * x_prev + beta**0.5 * noise


def forward_diffuse(
    x0: torch.Tensor, t: int, eps: torch.Tensor, schedule: NoiseSchedule
) -> torch.Tensor:
    """Jump straight from a clean latent to its noised version at step t.

    t=0 is the identity (no noise applied).
    """
    ab = schedule.alpha_bar(t)
    return ab**0.5 * x0 + (1.0 - ab) ** 0.5 * eps
