"""One-axis-at-a-time ablation grids with FID/SSIM result tables."""

from __future__ import annotations

import csv
import dataclasses
import logging
from pathlib import Path

import numpy as np

from ..errors import ValidationError
from ..evaluation.features import PixelPCAExtractor
from ..evaluation.report import evaluate, pooled_real_images
from ..diffusion.checkpoint import load_checkpoint
from ..stickers.build import DatasetManifest
from .config import TrainConfig
from .loop import train

log = logging.getLogger(__name__)

ABLATION_AXES = {
    "lora_rank": (4, 16, 32),
    "data_fraction": (0.5, 1.0),
    "paste_mode": ("center", "original_position"),
}


def _cell_config(base: TrainConfig, axis: str, value, seed: int) -> TrainConfig:
    kwargs = dataclasses.asdict(base)
    kwargs[axis] = value
    kwargs["seed"] = seed
    if axis == "lora_rank":
        kwargs["lora_alpha"] = None  # keep alpha = rank
    return TrainConfig(**kwargs)


def ablate(
    axis: str,
    values,
    base_config: TrainConfig,
    manifests: dict[str, DatasetManifest] | DatasetManifest,
    out_dir: str | Path,
    seeds=(0,),
    n_gen: int = 32,
    eval_steps: int | None = None,
) -> list[dict]:
    """Train and evaluate one grid cell per (value, seed); average over seeds.

    ``manifests`` maps paste mode to its manifest when the axis is
    ``paste_mode``; otherwise a single manifest is used for every cell.
    A failing cell is reported as FAILED without killing the grid.
    """
    if axis not in ABLATION_AXES:
        raise ValidationError(f"unknown ablation axis {axis!r}; expected one of {sorted(ABLATION_AXES)}")
    if values is None:
        values = ABLATION_AXES[axis]
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    # when cells score against different manifests, their distances must share
    # one feature basis or the numbers are not comparable across settings
    extractor = None
    if isinstance(manifests, dict) and len(manifests) > 1:
        pooled = []
        for m in manifests.values():
            pooled.extend(pooled_real_images(m, base_config.resolution))
        extractor = PixelPCAExtractor().fit(pooled)

    rows = []
    for value in values:
        fids, ssims = [], []
        status = "ok"
        for seed in seeds:
            try:
                if isinstance(manifests, dict):
                    manifest = manifests[str(value)] if axis == "paste_mode" else next(iter(manifests.values()))
                else:
                    manifest = manifests
                config = _cell_config(base_config, axis, value, seed)
                cell_dir = out_dir / f"{axis}_{value}_seed{seed}"
                report = train(config, manifest, cell_dir)
                model, schedule, _ = load_checkpoint(report.checkpoint_path)
                prompts = sorted({r["prompt"] for r in manifest.split("train")})
                eval_report = evaluate(
                    model,
                    schedule,
                    prompts,
                    manifest,
                    n_per_prompt=n_gen,
                    steps=eval_steps,
                    seed=seed,
                    out_dir=cell_dir / "eval",
                    extractor=extractor,
                )
                if eval_report.fid_global is None or eval_report.ssim_mean is None:
                    raise ValidationError("evaluation produced no aggregate scores")
                fids.append(eval_report.fid_global)
                ssims.append(eval_report.ssim_mean)
            except Exception:
                log.exception("ablation cell failed: %s=%s seed=%s", axis, value, seed)
                status = "FAILED"
        rows.append(
            {
                "setting": value,
                "fid": float(np.mean(fids)) if fids else None,
                "ssim": float(np.mean(ssims)) if ssims else None,
                "n_seeds": len(fids),
                "status": status if fids else "FAILED",
            }
        )

    _write_tables(out_dir, axis, rows)
    return rows


def _write_tables(out_dir: Path, axis: str, rows: list[dict]) -> None:
    with open(out_dir / f"ablation_{axis}.csv", "w", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=["setting", "fid", "ssim", "n_seeds", "status"])
        writer.writeheader()
        writer.writerows(rows)

    lines = [f"| {axis} | FID ↓ | SSIM ↑ |", "|---|---|---|"]
    for row in rows:
        if row["status"] == "FAILED":
            lines.append(f"| {row['setting']} | FAILED | FAILED |")
        else:
            lines.append(f"| {row['setting']} | {row['fid']:.4f} | {row['ssim']:.4f} |")
    (out_dir / f"ablation_{axis}.md").write_text("\n".join(lines) + "\n")
