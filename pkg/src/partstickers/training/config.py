"""Training configuration and the plain key=value config file format."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from pathlib import Path

from ..errors import ValidationError


@dataclass
class TrainConfig:
    """Fine-tuning recipe; the defaults are the production recipe verbatim.

    The toy-scale fields (resolution, timesteps, network width) control cost
    only and are meant to be overridden for desk-scale runs.
    """

    epochs: int = 10
    batch_size: int = 16
    lr: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    weight_decay: float = 0.01
    lora_rank: int = 16
    lora_alpha: float | None = None  # defaults to the rank
    lora_targets: tuple[str, ...] = ("q", "k", "v", "out")
    data_fraction: float = 1.0
    paste_mode: str = "center"
    seed: int = 0
    resolution: int = 512
    timesteps: int = 1000
    beta_start: float = 1e-4
    beta_end: float = 0.02
    base_channels: int = 32
    channel_multipliers: tuple[int, ...] = (1, 2)
    attention_resolutions: tuple[int, ...] = ()  # default: full and half resolution
    context_dim: int = 64
    time_embed_dim: int = 128
    num_heads: int = 4
    cfg_dropout: float = 0.0  # classifier-free guidance prompt dropout, off by default
    ema_decay: float = 0.999  # weight EMA for the pretraining stage; 0 disables
    lr_final: float | None = None  # pretraining cosine decay target; None keeps lr constant
    base_checkpoint: str | None = None  # pretrained base for adapter fine-tuning
    val_seed: int = 1234

    def __post_init__(self):
        if not 0.0 < self.data_fraction <= 1.0:
            raise ValidationError("data_fraction must be in (0, 1]")
        if self.lora_alpha is None:
            self.lora_alpha = float(self.lora_rank)
        self.lora_targets = tuple(self.lora_targets)
        self.channel_multipliers = tuple(int(m) for m in self.channel_multipliers)
        if not self.attention_resolutions:
            self.attention_resolutions = (self.resolution, self.resolution // 2)
        self.attention_resolutions = tuple(int(r) for r in self.attention_resolutions)

    def schedule_params(self) -> dict:
        return {
            "T": self.timesteps,
            "beta_start": self.beta_start,
            "beta_end": self.beta_end,
            "kind": "linear",
        }

    @classmethod
    def toy(cls, **overrides) -> "TrainConfig":
        """Desk-scale configuration: 32x32, T=400, small network."""
        defaults = dict(resolution=32, timesteps=400, base_channels=32)
        defaults.update(overrides)
        return cls(**defaults)


_LIST_FIELDS = {"channel_multipliers", "attention_resolutions", "lora_targets"}
_STR_FIELDS = {"paste_mode", "base_checkpoint"}


def _coerce(name: str, raw: str, field_type):
    if name in _STR_FIELDS:
        return raw
    if name in _LIST_FIELDS:
        items = [v.strip() for v in raw.split(",") if v.strip()]
        return tuple(items) if name == "lora_targets" else tuple(int(v) for v in items)
    if field_type in ("int", int):
        return int(raw)
    if field_type in ("float", float) or "float" in str(field_type):
        return float(raw)
    return raw


def load_config_file(path: str | Path) -> dict:
    """Parse a declarative ``key = value`` file; '#' starts a comment."""
    values: dict[str, str] = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValidationError(f"{path}:{lineno}: expected 'key = value'")
        key, raw = (part.strip() for part in line.split("=", 1))
        values[key] = raw
    return values


def apply_overrides(base: TrainConfig, overrides: dict[str, str]) -> TrainConfig:
    """Return a new config with string overrides coerced onto ``base``."""
    fields = {f.name: f for f in dataclasses.fields(TrainConfig)}
    kwargs = dataclasses.asdict(base)
    for key, raw in overrides.items():
        if key not in fields:
            raise ValidationError(f"unknown config key {key!r}")
        current = kwargs[key]
        target = type(current) if current is not None else float
        kwargs[key] = _coerce(key, raw, target) if isinstance(raw, str) else raw
    return TrainConfig(**kwargs)
