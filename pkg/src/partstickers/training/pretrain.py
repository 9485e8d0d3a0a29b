"""Base-model pretraining on whole-object stickers.

The fine-tuning loop assumes a pretrained text-conditioned base whose
attention adapters are the only trainable part. At desk scale no such base
exists, so this module trains one: every source image contributes a
whole-object sticker (the union of its part masks pasted onto the neutral
canvas) with the prompt ``"a {object}"``, and the full network is optimized
on the standard denoising loss. The vocabulary is built to include the part
prompts so the adapter stage never sees out-of-vocabulary tokens.
"""

from __future__ import annotations

import hashlib
import logging
import time
from pathlib import Path

import numpy as np
import torch

from ..diffusion.checkpoint import save_checkpoint
from ..diffusion.losses import denoise_loss
from ..diffusion.sampler import encode_image
from ..diffusion.schedule import make_schedule
from ..diffusion.text import PAD_ID, build_vocab
from ..diffusion.unet import build_model
from ..errors import TrainingDiverged, ValidationError
from ..stickers.annotations import load_annotations
from ..stickers.compose import compose_sticker, extract_part, make_prompt
from .config import TrainConfig
from .loop import TrainReport, _unet_config, validate

log = logging.getLogger(__name__)


def whole_object_stickers(
    corpus_root: str | Path,
    canvas_size: int,
    format: str = "synthetic",
    gray: tuple[int, int, int] = (128, 128, 128),
) -> tuple[list[np.ndarray], list[str], list[str], list[str]]:
    """One whole-object sticker per source image.

    Returns (canvases, prompts, image_ids, part_prompts): the union of an
    image's part masks pasted center onto a neutral canvas with the prompt
    ``"a {object}"``, plus the distinct part prompts for vocabulary building.
    """
    result = load_annotations(corpus_root, format=format)
    if not len(result):
        raise ValidationError(f"no annotations under {corpus_root}")

    by_image: dict[str, list] = {}
    for ann in result:
        by_image.setdefault(ann.image_id, []).append(ann)

    from PIL import Image

    canvases, prompts, image_ids = [], [], []
    for image_id in sorted(by_image):
        anns = by_image[image_id]
        image = np.asarray(Image.open(anns[0].image_path).convert("RGB"))
        union = np.zeros(image.shape[:2], dtype=np.uint8)
        for ann in anns:
            union |= ann.mask.astype(np.uint8)
        region = extract_part(image, union)
        canvases.append(compose_sticker(region, canvas_size, gray=gray, mode="center"))
        prompts.append(f"a {anns[0].object_label.strip().lower()}")
        image_ids.append(image_id)

    part_prompts = sorted({make_prompt(a.part_label, a.object_label) for a in result})
    return canvases, prompts, image_ids, part_prompts


def _holdout_split(image_ids: list[str], seed: int, val_fraction: float = 0.1):
    """Deterministic validation holdout over image ids, at least one each."""
    order = sorted(
        range(len(image_ids)),
        key=lambda i: hashlib.sha256(f"{seed}:{image_ids[i]}".encode()).hexdigest(),
    )
    n_val = max(1, int(len(order) * val_fraction))
    if n_val >= len(order):
        raise ValidationError("corpus too small to hold out a validation image")
    return order[n_val:], order[:n_val]


def cosine_lr(lr: float, lr_final: float, epoch: float, epochs: int) -> float:
    """Cosine interpolation from ``lr`` (epoch 0) to ``lr_final`` (last epoch)."""
    if epochs <= 1:
        return lr
    progress = epoch / (epochs - 1)
    return lr_final + 0.5 * (lr - lr_final) * (1.0 + float(np.cos(np.pi * progress)))


def pretrain(
    config: TrainConfig,
    corpus_root: str | Path,
    out_dir: str | Path,
    format: str = "synthetic",
) -> TrainReport:
    """Train the full base model on whole-object stickers; keep the best model.

    Writes ``base.pt`` under ``out_dir``; the checkpoint carries no adapters
    and can be passed to :func:`partstickers.training.train` via
    ``config.base_checkpoint``. When ``config.ema_decay`` is nonzero the
    persisted weights are an exponential moving average of the optimization
    trajectory, which substantially improves sample fidelity. When
    ``config.lr_final`` is set the learning rate follows a cosine decay from
    ``config.lr`` down to it over the epochs.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    started = time.monotonic()

    canvases, prompts, image_ids, part_prompts = whole_object_stickers(
        corpus_root, config.resolution, format=format
    )
    vocab = build_vocab(prompts + part_prompts)
    model = build_model(_unet_config(config), vocab, seed=config.seed)
    schedule = make_schedule(**config.schedule_params())

    x_all = encode_image(np.stack(canvases))
    tokens_all = torch.stack([model.token_ids(p) for p in prompts])
    train_idx, val_idx = _holdout_split(image_ids, config.seed)
    x_train, tokens_train = x_all[train_idx], tokens_all[train_idx]
    x_val, tokens_val = x_all[val_idx], tokens_all[val_idx]

    optimizer = torch.optim.AdamW(
        model.parameters(),
        lr=config.lr,
        betas=(config.beta1, config.beta2),
        weight_decay=config.weight_decay,
    )
    ema = None
    if config.ema_decay:
        ema = {k: v.detach().clone() for k, v in model.state_dict().items()}

    report = TrainReport(config=config)
    ckpt_path = out_dir / "base.pt"
    n = x_train.shape[0]
    step = 0

    for epoch in range(config.epochs):
        if config.lr_final is not None:
            lr = cosine_lr(config.lr, config.lr_final, epoch, config.epochs)
            for group in optimizer.param_groups:
                group["lr"] = lr
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
            if ema is not None:
                step += 1
                # ramp the decay so early random weights wash out quickly
                decay = min(config.ema_decay, (1 + step) / (10 + step))
                with torch.no_grad():
                    for key, value in model.state_dict().items():
                        if value.dtype.is_floating_point:
                            ema[key].mul_(decay).add_(value, alpha=1.0 - decay)
                        else:
                            ema[key].copy_(value)
            epoch_losses.append(float(loss.detach()))

        val_loss = validate(model, x_val, tokens_val, schedule, seed=config.val_seed)
        report.train_losses.append(float(np.mean(epoch_losses)))
        report.val_losses.append(val_loss)
        log.info("pretrain epoch %d: train %.5f val %.5f", epoch, report.train_losses[-1], val_loss)
        if val_loss < report.best_val_loss:
            report.best_val_loss = val_loss
            report.best_epoch = epoch

    # the EMA weights average out late-training oscillation; persist those
    if ema is not None:
        model.load_state_dict(ema)
    save_checkpoint(
        ckpt_path,
        model,
        schedule_params=config.schedule_params(),
        lora_params=None,
        extra={"stage": "pretrain", "val_loss": report.val_losses[-1], "config": vars(config)},
    )
    report.checkpoint_path = ckpt_path
    report.wall_clock_s = time.monotonic() - started
    return report
