"""A small text-conditioned U-Net noise predictor.

Attention blocks expose their projections as ``q_proj``/``k_proj``/``v_proj``/
``out_proj`` linears so the low-rank adapters can target them by name. Two
fixed coordinate channels are concatenated to the input so absolute position
is available to the network regardless of depth.

The per-channel spatial means and medians of the input are appended as
broadcast channels and also feed a small head that contributes a per-channel
constant to the output. GroupNorm layers are nearly invariant to a global
color shift, so without these paths the predictor is blind to the DC
component of its input and the sampling chain cannot correct an accumulating
color cast; the median pins down the background level even when a large
foreground region skews the mean.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import torch
from torch import nn
import torch.nn.functional as F

from ..errors import ValidationError
from .text import TextEncoder, Vocab


@dataclass
class UNetConfig:
    resolution: int = 32
    in_channels: int = 3
    base_channels: int = 32
    channel_multipliers: tuple[int, ...] = (1, 2)
    attention_resolutions: tuple[int, ...] = (32, 16)
    time_embed_dim: int = 128
    context_dim: int = 64
    num_heads: int = 4
    max_prompt_len: int = 8

    def __post_init__(self):
        self.channel_multipliers = tuple(self.channel_multipliers)
        self.attention_resolutions = tuple(self.attention_resolutions)
        factor = 2 ** (len(self.channel_multipliers) - 1)
        if self.resolution % factor:
            raise ValidationError(
                f"resolution {self.resolution} not divisible by {factor}"
            )


def _norm(channels: int) -> nn.GroupNorm:
    groups = 8 if channels % 8 == 0 else 1
    return nn.GroupNorm(groups, channels)


def timestep_embedding(t: torch.Tensor, dim: int) -> torch.Tensor:
    half = dim // 2
    freqs = torch.exp(
        torch.arange(half, dtype=torch.float32, device=t.device)
        * (-math.log(10000.0) / half)
    ).to(t.dtype if t.is_floating_point() else torch.float32)
    args = t.float()[:, None] * freqs[None, :]
    return torch.cat([torch.sin(args), torch.cos(args)], dim=-1)


class ResBlock(nn.Module):
    def __init__(self, in_ch: int, out_ch: int, time_dim: int):
        super().__init__()
        self.norm1 = _norm(in_ch)
        self.conv1 = nn.Conv2d(in_ch, out_ch, 3, padding=1)
        self.time_proj = nn.Linear(time_dim, out_ch)
        self.norm2 = _norm(out_ch)
        self.conv2 = nn.Conv2d(out_ch, out_ch, 3, padding=1)
        self.skip = nn.Conv2d(in_ch, out_ch, 1) if in_ch != out_ch else nn.Identity()

    def forward(self, x, t_emb):
        h = self.conv1(F.silu(self.norm1(x)))
        h = h + self.time_proj(F.silu(t_emb))[:, :, None, None]
        h = self.conv2(F.silu(self.norm2(h)))
        return h + self.skip(x)


class Attention(nn.Module):
    """Multi-head attention over flattened spatial tokens.

    With ``context_dim`` set, keys and values come from the text context
    (cross-attention); otherwise from the image tokens themselves.
    """

    def __init__(self, channels: int, num_heads: int, context_dim: int | None = None):
        super().__init__()
        if channels % num_heads:
            raise ValidationError(f"channels {channels} not divisible by heads {num_heads}")
        kv_dim = context_dim if context_dim is not None else channels
        self.num_heads = num_heads
        self.q_proj = nn.Linear(channels, channels)
        self.k_proj = nn.Linear(kv_dim, channels)
        self.v_proj = nn.Linear(kv_dim, channels)
        self.out_proj = nn.Linear(channels, channels)

    def forward(self, tokens: torch.Tensor, context: torch.Tensor | None = None):
        source = tokens if context is None else context
        b, n, c = tokens.shape
        h = self.num_heads
        q = self.q_proj(tokens).view(b, n, h, c // h).transpose(1, 2)
        k = self.k_proj(source).view(b, source.shape[1], h, c // h).transpose(1, 2)
        v = self.v_proj(source).view(b, source.shape[1], h, c // h).transpose(1, 2)
        attn = torch.softmax(q @ k.transpose(-2, -1) / math.sqrt(c // h), dim=-1)
        out = (attn @ v).transpose(1, 2).reshape(b, n, c)
        return self.out_proj(out)


class AttentionBlock(nn.Module):
    """Self-attention followed by cross-attention to the prompt context."""

    def __init__(self, channels: int, context_dim: int, num_heads: int):
        super().__init__()
        self.norm_self = _norm(channels)
        self.self_attn = Attention(channels, num_heads)
        self.norm_cross = _norm(channels)
        self.cross_attn = Attention(channels, num_heads, context_dim=context_dim)

    def forward(self, x: torch.Tensor, context: torch.Tensor) -> torch.Tensor:
        b, c, hh, ww = x.shape
        tokens = self.norm_self(x).flatten(2).transpose(1, 2)
        x = x + self.self_attn(tokens).transpose(1, 2).view(b, c, hh, ww)
        tokens = self.norm_cross(x).flatten(2).transpose(1, 2)
        x = x + self.cross_attn(tokens, context).transpose(1, 2).view(b, c, hh, ww)
        return x


class UNet(nn.Module):
    def __init__(self, config: UNetConfig):
        super().__init__()
        self.config = config
        cfg = config
        time_dim = cfg.time_embed_dim
        self.time_mlp = nn.Sequential(
            nn.Linear(cfg.base_channels, time_dim),
            nn.SiLU(),
            nn.Linear(time_dim, time_dim),
        )

        # +2 coordinate channels, +2*in_channels broadcast means and medians
        self.in_conv = nn.Conv2d(3 * cfg.in_channels + 2, cfg.base_channels, 3, padding=1)
        self.dc_head = nn.Sequential(
            nn.Linear(2 * cfg.in_channels + time_dim, cfg.base_channels),
            nn.SiLU(),
            nn.Linear(cfg.base_channels, cfg.in_channels),
        )
        nn.init.zeros_(self.dc_head[-1].weight)
        nn.init.zeros_(self.dc_head[-1].bias)

        chans = [cfg.base_channels * m for m in cfg.channel_multipliers]
        levels = len(chans)
        res = cfg.resolution

        self.down_blocks = nn.ModuleList()
        self.down_attns = nn.ModuleList()
        self.downsamples = nn.ModuleList()
        skip_chans = []
        ch = cfg.base_channels
        for i, out_ch in enumerate(chans):
            self.down_blocks.append(ResBlock(ch, out_ch, time_dim))
            self.down_attns.append(
                AttentionBlock(out_ch, cfg.context_dim, cfg.num_heads)
                if res in cfg.attention_resolutions
                else None
            )
            ch = out_ch
            skip_chans.append(ch)
            if i < levels - 1:
                self.downsamples.append(nn.Conv2d(ch, ch, 3, stride=2, padding=1))
                res //= 2

        self.mid_block1 = ResBlock(ch, ch, time_dim)
        self.mid_attn = AttentionBlock(ch, cfg.context_dim, cfg.num_heads)
        self.mid_block2 = ResBlock(ch, ch, time_dim)

        self.up_blocks = nn.ModuleList()
        self.up_attns = nn.ModuleList()
        self.upsamples = nn.ModuleList()
        for i in reversed(range(levels)):
            if i < levels - 1:
                self.upsamples.append(nn.Conv2d(ch, ch, 3, padding=1))
                res *= 2
            self.up_blocks.append(ResBlock(ch + skip_chans[i], chans[i], time_dim))
            self.up_attns.append(
                AttentionBlock(chans[i], cfg.context_dim, cfg.num_heads)
                if res in cfg.attention_resolutions
                else None
            )
            ch = chans[i]

        self.out_norm = _norm(ch)
        self.out_conv = nn.Conv2d(ch, cfg.in_channels, 3, padding=1)

    def _coords(self, x: torch.Tensor) -> torch.Tensor:
        b, _, h, w = x.shape
        ys = torch.linspace(-1, 1, h, dtype=x.dtype, device=x.device)
        xs = torch.linspace(-1, 1, w, dtype=x.dtype, device=x.device)
        gy, gx = torch.meshgrid(ys, xs, indexing="ij")
        return torch.stack([gy, gx]).unsqueeze(0).expand(b, -1, -1, -1)

    def forward(self, x: torch.Tensor, t: torch.Tensor, context: torch.Tensor):
        t_emb = self.time_mlp(
            timestep_embedding(t, self.config.base_channels).to(x.dtype)
        )
        x_mean = x.mean(dim=(2, 3), keepdim=True)
        x_median = x.flatten(2).median(dim=2).values[:, :, None, None]
        h = self.in_conv(
            torch.cat(
                [x, x_mean.expand_as(x), x_median.expand_as(x), self._coords(x)], dim=1
            )
        )
        skips = []
        for i, block in enumerate(self.down_blocks):
            h = block(h, t_emb)
            if self.down_attns[i] is not None:
                h = self.down_attns[i](h, context)
            skips.append(h)
            if i < len(self.downsamples):
                h = self.downsamples[i](h)

        h = self.mid_block1(h, t_emb)
        h = self.mid_attn(h, context)
        h = self.mid_block2(h, t_emb)

        for j, block in enumerate(self.up_blocks):
            if j > 0:
                h = F.interpolate(h, scale_factor=2, mode="nearest")
                h = self.upsamples[j - 1](h)
            h = block(torch.cat([h, skips[-1 - j]], dim=1), t_emb)
            if self.up_attns[j] is not None:
                h = self.up_attns[j](h, context)

        out = self.out_conv(F.silu(self.out_norm(h)))
        dc = self.dc_head(
            torch.cat([x_mean.flatten(1), x_median.flatten(1), t_emb], dim=1)
        )
        return out + dc[:, :, None, None]


class ConditionedDenoiser(nn.Module):
    """Noise predictor conditioned on (noised latent, timestep, prompt)."""

    def __init__(self, config: UNetConfig, vocab: Vocab):
        super().__init__()
        self.config = config
        self.text = TextEncoder(vocab, embed_dim=config.context_dim, max_len=config.max_prompt_len)
        self.unet = UNet(config)

    def forward(self, x_t: torch.Tensor, t: torch.Tensor, token_ids: torch.Tensor):
        context = self.text(token_ids).to(x_t.dtype)
        return self.unet(x_t, t, context)

    def token_ids(self, prompt: str) -> torch.Tensor:
        return self.text.token_ids(prompt)


def build_model(config: UNetConfig, vocab: Vocab, seed: int = 0) -> ConditionedDenoiser:
    """Construct a denoiser with seeded initialization."""
    generator_state = torch.random.get_rng_state()
    torch.manual_seed(seed)
    try:
        model = ConditionedDenoiser(config, vocab)
    finally:
        torch.random.set_rng_state(generator_state)
    return model
