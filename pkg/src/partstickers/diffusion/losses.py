"""The denoising training objective."""

from __future__ import annotations

import torch

from ..errors import ValidationError
from .schedule import NoiseSchedule

_MIX = 0x9E3779B97F4A7C15


def sample_key_generator(seed: int, key: int) -> torch.Generator:
    """Deterministic per-sample RNG stream keyed by (seed, sample key)."""
    mixed = (seed * _MIX + key * 0x100000001B3 + 0x2545F4914F6CDD1D) % (2**63)
    return torch.Generator().manual_seed(mixed)


def draw_noise_and_timesteps(
    x0: torch.Tensor, schedule: NoiseSchedule, seed: int, keys
) -> tuple[torch.Tensor, torch.Tensor]:
    """Per-sample (epsilon, t) draws; t uniform on {1..T}, eps standard normal.

    Draws depend only on (seed, key), so permuting a batch together with its
    keys leaves every per-sample term unchanged.
    """
    eps = torch.empty_like(x0)
    ts = torch.empty(x0.shape[0], dtype=torch.long)
    for i, key in enumerate(keys):
        g = sample_key_generator(seed, int(key))
        ts[i] = torch.randint(1, schedule.T + 1, (1,), generator=g)
        eps[i] = torch.randn(x0.shape[1:], generator=g, dtype=torch.float32).to(x0.dtype)
    return eps, ts


def denoise_loss(
    model,
    x0: torch.Tensor,
    token_ids: torch.Tensor,
    schedule: NoiseSchedule,
    seed: int,
    keys=None,
) -> torch.Tensor:
    """Mean squared error between injected and predicted noise.

    Averaged over every element of the batch. ``keys`` identifies each sample
    for the RNG stream; defaults to the batch position.
    """
    if x0.shape[0] == 0:
        raise ValidationError("empty batch")
    if keys is None:
        keys = range(x0.shape[0])
    eps, ts = draw_noise_and_timesteps(x0, schedule, seed, keys)
    ab = schedule.alpha_bars.to(x0.dtype)[ts].view(-1, *([1] * (x0.dim() - 1)))
    x_t = ab.sqrt() * x0 + (1.0 - ab).sqrt() * eps
    pred = model(x_t, ts, token_ids)
    return ((eps - pred) ** 2).mean()
