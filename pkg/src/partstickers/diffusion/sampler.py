"""Ancestral sampling: full-length and strided reverse chains."""

from __future__ import annotations

import logging

import numpy as np
import torch

from ..errors import ValidationError
from .schedule import NoiseSchedule
from .text import PAD_ID, UNK_ID

log = logging.getLogger(__name__)


def reverse_step(
    model,
    x_t: torch.Tensor,
    t: int,
    token_ids: torch.Tensor,
    schedule: NoiseSchedule,
    generator: torch.Generator | None = None,
) -> torch.Tensor:
    """One ancestral denoising step from t to t-1.

    Uses the posterior variance beta_t * (1 - abar_{t-1}) / (1 - abar_t) and
    adds no noise at t=1.
    """
    beta = schedule.beta(t)
    alpha = schedule.alpha(t)
    ab_t = schedule.alpha_bar(t)
    ts = torch.full((x_t.shape[0],), t, dtype=torch.long)
    eps_hat = model(x_t, ts, token_ids)
    mean = (x_t - beta / (1.0 - ab_t) ** 0.5 * eps_hat) / alpha**0.5
    if t == 1:
        return mean
    var = schedule.posterior_variance(t)
    z = torch.randn(x_t.shape, generator=generator, dtype=torch.float32).to(x_t.dtype)
    return mean + var**0.5 * z


def _timestep_path(T: int, steps: int) -> list[int]:
    """Descending timesteps visited by a strided chain, always ending at 1."""
    if not 1 <= steps <= T:
        raise ValidationError(f"steps must be in [1, {T}], got {steps}")
    ts = np.unique(np.linspace(1, T, steps).round().astype(int))
    return [int(t) for t in ts[::-1]]


def _predict_eps(model, x_t, ts, token_ids, guidance):
    eps = model(x_t, ts, token_ids)
    if guidance is None or guidance == 1.0:
        return eps
    uncond = torch.full_like(token_ids, PAD_ID)
    eps_uncond = model(x_t, ts, uncond)
    return eps_uncond + guidance * (eps - eps_uncond)


def sample_latents(
    model,
    token_ids: torch.Tensor,
    schedule: NoiseSchedule,
    steps: int,
    generator: torch.Generator,
    shape: tuple[int, ...],
    guidance: float | None = None,
    clip_x0: bool = False,
) -> torch.Tensor:
    """Run the reverse chain from pure noise down to a clean latent.

    A strided chain jumps between schedule timesteps using the closed-form
    posterior between the visited steps; with ``steps == T`` this reduces to
    the one-step-at-a-time ancestral sampler. ``clip_x0`` clamps the implied
    clean latent to [-1, 1] at every step, appropriate for pixel-space data.
    """
    path = _timestep_path(schedule.T, steps)
    x = torch.randn(shape, generator=generator)
    ab = schedule.alpha_bars
    for idx, t in enumerate(path):
        t_prev = path[idx + 1] if idx + 1 < len(path) else 0
        ts = torch.full((shape[0],), t, dtype=torch.long)
        with torch.no_grad():
            eps_hat = _predict_eps(model, x, ts, token_ids, guidance)
        ab_t = float(ab[t])
        x0_hat = (x - (1.0 - ab_t) ** 0.5 * eps_hat) / ab_t**0.5
        if clip_x0:
            x0_hat = x0_hat.clamp(-1.0, 1.0)
        if t_prev == 0:
            x = x0_hat
            break
        ab_p = float(ab[t_prev])
        ratio = ab_t / ab_p
        coef_x0 = ab_p**0.5 * (1.0 - ratio) / (1.0 - ab_t)
        coef_xt = ratio**0.5 * (1.0 - ab_p) / (1.0 - ab_t)
        var = (1.0 - ab_p) / (1.0 - ab_t) * (1.0 - ratio)
        z = torch.randn(shape, generator=generator)
        x = coef_x0 * x0_hat + coef_xt * x + var**0.5 * z
    return x


def decode_latent(x: torch.Tensor) -> np.ndarray:
    """Pixel-space decode: map [-1, 1] latents to uint8 images (N, H, W, 3)."""
    imgs = ((x.detach().cpu().numpy() + 1.0) / 2.0 * 255.0).round()
    return np.clip(imgs, 0, 255).astype(np.uint8).transpose(0, 2, 3, 1)


def encode_image(images: np.ndarray) -> torch.Tensor:
    """Inverse of decode_latent for uint8 (N, H, W, 3) arrays."""
    x = torch.from_numpy(np.ascontiguousarray(images)).float() / 255.0 * 2.0 - 1.0
    return x.permute(0, 3, 1, 2)


def sample(
    model,
    prompt: str,
    schedule: NoiseSchedule,
    steps: int | None = None,
    seed: int = 0,
    n: int = 1,
    guidance: float | None = None,
) -> np.ndarray:
    """Generate ``n`` images for one prompt; deterministic per seed."""
    if steps is None:
        steps = schedule.T
    ids = model.token_ids(prompt)
    if (ids == UNK_ID).any():
        log.warning("prompt %r contains out-of-vocabulary tokens; using UNK", prompt)
    token_ids = ids.unsqueeze(0).expand(n, -1)
    res = model.config.resolution
    generator = torch.Generator().manual_seed(seed)
    model.eval()
    latents = sample_latents(
        model,
        token_ids,
        schedule,
        steps,
        generator,
        shape=(n, model.config.in_channels, res, res),
        guidance=guidance,
        clip_x0=True,
    )
    return decode_latent(latents)
