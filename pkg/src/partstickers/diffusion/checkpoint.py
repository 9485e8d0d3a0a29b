"""Checkpoint container: weights, adapter, configs, schedule, vocab."""

from __future__ import annotations

import dataclasses
import subprocess
from pathlib import Path

import torch

from ..errors import ValidationError
from .lora import lora_state_dict, lora_wrap
from .schedule import NoiseSchedule, make_schedule
from .text import Vocab
from .unet import ConditionedDenoiser, UNetConfig, build_model

FORMAT_VERSION = 1


def _git_describe() -> str:
    try:
        out = subprocess.run(
            ["git", "describe", "--always", "--dirty"],
            capture_output=True,
            text=True,
            timeout=5,
        )
        if out.returncode == 0:
            return out.stdout.strip()
    except OSError:
        pass
    return "unknown"


def save_checkpoint(
    path: str | Path,
    model: ConditionedDenoiser,
    schedule_params: dict,
    lora_params: dict | None = None,
    extra: dict | None = None,
) -> Path:
    """Persist a full model (base + any attached adapters) to one archive.

    ``schedule_params`` is {"T", "beta_start", "beta_end", "kind"};
    ``lora_params`` is {"rank", "alpha", "targets"} when adapters are attached.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = {
        "format_version": FORMAT_VERSION,
        "unet_config": dataclasses.asdict(model.config),
        "vocab": dict(model.text.vocab.token_to_id),
        "state_dict": model.state_dict(),
        "schedule": dict(schedule_params),
        "lora": dict(lora_params) if lora_params else None,
        "git_describe": _git_describe(),
        "extra": extra or {},
    }
    torch.save(payload, path)
    return path


def load_checkpoint(path: str | Path) -> tuple[ConditionedDenoiser, NoiseSchedule, dict]:
    path = Path(path)
    if not path.exists():
        raise ValidationError(f"checkpoint not found: {path}")
    try:
        payload = torch.load(path, map_location="cpu", weights_only=False)
    except Exception as exc:
        raise ValidationError(f"cannot read checkpoint {path}: {exc}") from exc
    if not isinstance(payload, dict) or "state_dict" not in payload:
        raise ValidationError(f"not a model checkpoint: {path}")

    config = UNetConfig(**payload["unet_config"])
    vocab = Vocab(dict(payload["vocab"]))
    model = build_model(config, vocab, seed=0)
    if payload.get("lora"):
        lora = payload["lora"]
        lora_wrap(model, rank=lora["rank"], alpha=lora["alpha"], targets=lora["targets"])
    model.load_state_dict(payload["state_dict"])
    model.eval()
    sched = payload["schedule"]
    schedule = make_schedule(
        sched["T"], sched["beta_start"], sched["beta_end"], sched.get("kind", "linear")
    )
    meta = {
        "git_describe": payload.get("git_describe", "unknown"),
        "lora": payload.get("lora"),
        "extra": payload.get("extra", {}),
    }
    return model, schedule, meta


def export_adapter(path: str | Path, model: ConditionedDenoiser, lora_params: dict) -> Path:
    """Write only the adapter tensors plus the settings needed to re-attach them."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    torch.save(
        {
            "format_version": FORMAT_VERSION,
            "lora": dict(lora_params),
            "adapter_state": lora_state_dict(model),
        },
        path,
    )
    return path
