"""The fine-tuning loop: adapter-only optimization with validation checkpointing."""

from __future__ import annotations

import hashlib
import logging
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch
from PIL import Image

from ..diffusion.checkpoint import save_checkpoint
from ..diffusion.losses import denoise_loss
from ..diffusion.lora import base_weight_digest, lora_parameters, lora_wrap
from ..diffusion.sampler import encode_image
from ..diffusion.schedule import make_schedule
from ..diffusion.text import PAD_ID, build_vocab
from ..diffusion.unet import UNetConfig, build_model
from ..errors import TrainingDiverged, ValidationError
from ..stickers.build import DatasetManifest
from .config import TrainConfig

log = logging.getLogger(__name__)


@dataclass
class TrainReport:
    train_losses: list[float] = field(default_factory=list)
    val_losses: list[float] = field(default_factory=list)
    best_epoch: int = -1
    best_val_loss: float = math.inf
    checkpoint_path: Path | None = None
    wall_clock_s: float = 0.0
    config: TrainConfig | None = None
    base_digest_before: str = ""
    base_digest_after: str = ""


def fraction_subset(records: list[dict], fraction: float, seed: int) -> list[dict]:
    """Deterministic, nested subsets: smaller fractions are prefixes of larger.

    Records are ordered by a seeded hash of their canvas path; the ordering
    does not depend on the fraction, so the 50% set is contained in the 80%
    set and so on.
    """
    if not 0.0 < fraction <= 1.0:
        raise ValidationError("fraction must be in (0, 1]")
    ordered = sorted(
        records,
        key=lambda r: hashlib.sha256(f"{seed}:{r['canvas_path']}".encode()).hexdigest(),
    )
    count = max(1, math.ceil(fraction * len(records)))
    return ordered[:count]


def _load_split(manifest: DatasetManifest, records: list[dict], resolution: int):
    images = []
    for record in records:
        img = Image.open(manifest.canvas_path(record)).convert("RGB")
        if img.size != (resolution, resolution):
            img = img.resize((resolution, resolution), Image.BILINEAR)
        images.append(np.asarray(img))
    return encode_image(np.stack(images))


def _unet_config(config: TrainConfig) -> UNetConfig:
    return UNetConfig(
        resolution=config.resolution,
        base_channels=config.base_channels,
        channel_multipliers=config.channel_multipliers,
        attention_resolutions=config.attention_resolutions,
        time_embed_dim=config.time_embed_dim,
        context_dim=config.context_dim,
        num_heads=config.num_heads,
    )


def validate(model, x0: torch.Tensor, token_ids: torch.Tensor, schedule, seed: int,
             batch_size: int = 64) -> float:
    """Mean denoising loss over a split with frozen per-sample noise draws.

    The (t, eps) draws depend only on (seed, sample index), so the value is
    comparable across epochs and identical for identical models.
    """
    if x0.shape[0] == 0:
        raise ValidationError("empty validation split")
    model.eval()
    total, count = 0.0, 0
    with torch.no_grad():
        for start in range(0, x0.shape[0], batch_size):
            idx = range(start, min(start + batch_size, x0.shape[0]))
            loss = denoise_loss(
                model, x0[idx.start : idx.stop], token_ids[idx.start : idx.stop],
                schedule, seed=seed, keys=idx,
            )
            n = idx.stop - idx.start
            total += float(loss) * n
            count += n
    return total / count


def _load_base(config: TrainConfig):
    """Load a pretrained base for adapter fine-tuning.

    The checkpoint must be adapter-free and its schedule must agree with the
    config so losses and samples stay comparable across the two stages.
    """
    from ..diffusion.checkpoint import load_checkpoint

    model, schedule, meta = load_checkpoint(config.base_checkpoint)
    if meta.get("lora"):
        raise ValidationError(
            f"base checkpoint {config.base_checkpoint} already carries adapters"
        )
    if model.config.resolution != config.resolution:
        raise ValidationError(
            f"base checkpoint resolution {model.config.resolution} != configured "
            f"{config.resolution}"
        )
    if schedule.T != config.timesteps:
        raise ValidationError(
            f"base checkpoint schedule T={schedule.T} != configured {config.timesteps}"
        )
    return model, schedule


def train(config: TrainConfig, manifest: DatasetManifest, out_dir: str | Path) -> TrainReport:
    """Fine-tune adapters on a sticker manifest and keep the best-validation model."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    started = time.monotonic()

    train_records = manifest.split("train")
    val_records = manifest.split("val")
    if not train_records or not val_records:
        raise ValidationError("manifest needs nonempty train and val splits")
    train_records = fraction_subset(train_records, config.data_fraction, config.seed)

    if config.base_checkpoint:
        model, schedule = _load_base(config)
    else:
        vocab = build_vocab([r["prompt"] for r in train_records])
        model = build_model(_unet_config(config), vocab, seed=config.seed)
        schedule = make_schedule(**config.schedule_params())

    report = TrainReport(config=config)
    report.base_digest_before = base_weight_digest(model)

    lora_wrap(
        model,
        rank=config.lora_rank,
        alpha=config.lora_alpha,
        targets=config.lora_targets,
        seed=config.seed,
    )
    optimizer = torch.optim.AdamW(
        lora_parameters(model),
        lr=config.lr,
        betas=(config.beta1, config.beta2),
        weight_decay=config.weight_decay,
    )

    x_train = _load_split(manifest, train_records, config.resolution)
    tokens_train = torch.stack([model.token_ids(r["prompt"]) for r in train_records])
    x_val = _load_split(manifest, val_records, config.resolution)
    tokens_val = torch.stack([model.token_ids(r["prompt"]) for r in val_records])

    n = x_train.shape[0]
    lora_params = {
        "rank": config.lora_rank,
        "alpha": config.lora_alpha,
        "targets": list(config.lora_targets),
    }
    ckpt_path = out_dir / "checkpoint.pt"

    for epoch in range(config.epochs):
        model.train()
        shuffle_gen = torch.Generator().manual_seed(config.seed * 100003 + epoch)
        perm = torch.randperm(n, generator=shuffle_gen)
        epoch_losses = []
        for batch_index, start in enumerate(range(0, n, config.batch_size)):
            idx = perm[start : start + config.batch_size]
            tokens = tokens_train[idx]
            if config.cfg_dropout > 0:
                drop = torch.rand(len(idx), generator=shuffle_gen) < config.cfg_dropout
                tokens = tokens.clone()
                tokens[drop] = PAD_ID
            loss = denoise_loss(
                model,
                x_train[idx],
                tokens,
                schedule,
                seed=config.seed * 1000003 + epoch,
                keys=[int(i) for i in idx],
            )
            if not torch.isfinite(loss):
                raise TrainingDiverged(epoch, batch_index)
            optimizer.zero_grad()
            loss.backward()
            optimizer.step()
            epoch_losses.append(float(loss.detach()))

        val_loss = validate(model, x_val, tokens_val, schedule, seed=config.val_seed)
        report.train_losses.append(float(np.mean(epoch_losses)))
        report.val_losses.append(val_loss)
        log.info(
            "epoch %d: train %.5f val %.5f", epoch, report.train_losses[-1], val_loss
        )
        if val_loss < report.best_val_loss:
            report.best_val_loss = val_loss
            report.best_epoch = epoch
            save_checkpoint(
                ckpt_path,
                model,
                schedule_params=config.schedule_params(),
                lora_params=lora_params,
                extra={"epoch": epoch, "val_loss": val_loss, "config": vars(config)},
            )

    report.checkpoint_path = ckpt_path
    report.base_digest_after = base_weight_digest(model)
    report.wall_clock_s = time.monotonic() - started
    if report.base_digest_after != report.base_digest_before:
        raise RuntimeError("base weights changed during adapter-only training")
    return report
