"""Command-line entry point for the full pipeline."""

from __future__ import annotations

import dataclasses
import json
import logging
import sys
from pathlib import Path

import click
import numpy as np
from PIL import Image

from .errors import PartStickersError, ValidationError
from .stickers import BuildConfig, build_dataset, load_manifest, synth_corpus
from .training import TrainConfig, ablate, apply_overrides, load_config_file, pretrain, train

log = logging.getLogger(__name__)


def _write_snapshot(out_dir: Path, subcommand: str, config: dict) -> None:
    """Record the fully resolved configuration next to the outputs."""
    out_dir.mkdir(parents=True, exist_ok=True)

    def default(o):
        if dataclasses.is_dataclass(o):
            return dataclasses.asdict(o)
        if isinstance(o, Path):
            return str(o)
        return str(o)

    with open(out_dir / f"{subcommand}.resolved.json", "w") as f:
        json.dump({"subcommand": subcommand, **config}, f, indent=1, sort_keys=True, default=default)


def _train_config(config_path, overrides, **flag_values) -> TrainConfig:
    """Precedence: CLI flag > config file > defaults."""
    values = load_config_file(config_path) if config_path else {}
    for item in overrides:
        if "=" not in item:
            raise ValidationError(f"override must look like key=value, got {item!r}")
        key, raw = item.split("=", 1)
        values[key.strip()] = raw.strip()
    for key, value in flag_values.items():
        if value is not None:
            values[key] = str(value)
    return apply_overrides(TrainConfig.toy(), values)


@click.group()
def cli():
    """Part-sticker dataset construction, fine-tuning, and evaluation."""
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")


@cli.command()
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--n", "n_images", type=int, default=20, show_default=True)
@click.option("--out", type=click.Path(path_type=Path), required=True)
@click.option("--image-size", type=int, default=64, show_default=True)
def synth(seed, n_images, out, image_size):
    """Generate a synthetic part-segmentation corpus."""
    root = synth_corpus(seed=seed, n_images=n_images, out=out, image_size=image_size)
    _write_snapshot(root, "synth", {"seed": seed, "n": n_images, "image_size": image_size})
    click.echo(f"wrote synthetic corpus to {root}")


@cli.command("build-dataset")
@click.option("--root", type=click.Path(path_type=Path, exists=True), required=True)
@click.option("--out", type=click.Path(path_type=Path), required=True)
@click.option("--format", "fmt", type=click.Choice(["synthetic", "cocopart_json"]), default="synthetic", show_default=True)
@click.option("--canvas-size", type=int, default=64, show_default=True)
@click.option("--gray", nargs=3, type=int, default=(128, 128, 128), show_default=True)
@click.option("--mode", type=click.Choice(["center", "original"]), default="center", show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--min-part-area", type=int, default=16, show_default=True)
def build_dataset_cmd(root, out, fmt, canvas_size, gray, mode, seed, min_part_area):
    """Compose sticker canvases and write the dataset manifest."""
    config = BuildConfig(
        root=root,
        out=out,
        format=fmt,
        canvas_size=canvas_size,
        gray=tuple(gray),
        mode="original_position" if mode == "original" else mode,
        seed=seed,
        min_part_area=min_part_area,
    )
    manifest = build_dataset(config)
    _write_snapshot(out, "build-dataset", {"config": config})
    click.echo(f"built {len(manifest.records)} stickers under {out}")


@cli.command("pretrain")
@click.option("--root", type=click.Path(path_type=Path, exists=True), required=True)
@click.option("--out", type=click.Path(path_type=Path), required=True)
@click.option("--format", "fmt", type=click.Choice(["synthetic", "cocopart_json"]), default="synthetic", show_default=True)
@click.option("--config", "config_path", type=click.Path(path_type=Path, exists=True), default=None)
@click.option("--set", "overrides", multiple=True, help="Config override, key=value.")
@click.option("--seed", type=int, default=None)
@click.option("--epochs", type=int, default=None)
def pretrain_cmd(root, out, fmt, config_path, overrides, seed, epochs):
    """Train the base model on whole-object stickers from a source corpus."""
    config = _train_config(config_path, overrides, seed=seed, epochs=epochs)
    _write_snapshot(Path(out), "pretrain", {"config": config, "root": str(root)})
    report = pretrain(config, root, out, format=fmt)
    click.echo(
        f"final val loss {report.val_losses[-1]:.5f}; base checkpoint at {report.checkpoint_path}"
    )


@cli.command("train")
@click.option("--manifest", "manifest_path", type=click.Path(path_type=Path, exists=True), required=True)
@click.option("--out", type=click.Path(path_type=Path), required=True)
@click.option("--config", "config_path", type=click.Path(path_type=Path, exists=True), default=None)
@click.option("--set", "overrides", multiple=True, help="Config override, key=value.")
@click.option("--seed", type=int, default=None)
@click.option("--epochs", type=int, default=None)
@click.option("--base", "base_checkpoint", type=click.Path(path_type=Path, exists=True),
              default=None, help="Pretrained base checkpoint to fine-tune.")
def train_cmd(manifest_path, out, config_path, overrides, seed, epochs, base_checkpoint):
    """Fine-tune adapters on a sticker manifest."""
    config = _train_config(
        config_path, overrides, seed=seed, epochs=epochs, base_checkpoint=base_checkpoint
    )
    manifest = load_manifest(manifest_path)
    _write_snapshot(Path(out), "train", {"config": config, "manifest": str(manifest_path)})
    report = train(config, manifest, out)
    click.echo(
        f"best epoch {report.best_epoch} (val loss {report.best_val_loss:.5f}); "
        f"checkpoint at {report.checkpoint_path}"
    )


@cli.command()
@click.option("--ckpt", type=click.Path(path_type=Path), required=True)
@click.option("--prompt", required=True)
@click.option("--n", type=int, default=100, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--steps", type=int, default=None, help="Sampling steps; defaults to the schedule length.")
@click.option("--out", type=click.Path(path_type=Path), required=True)
def generate(ckpt, prompt, n, seed, steps, out):
    """Sample images for one prompt; writes PNGs, a contact sheet, and the running average."""
    from .diffusion import load_checkpoint, sample
    from .evaluation.metrics import average_image, export_image

    model, schedule, _ = load_checkpoint(ckpt)
    images = sample(model, prompt, schedule, steps=steps, seed=seed, n=n)
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    for i, img in enumerate(images):
        Image.fromarray(img).save(out / f"sample_{i:04d}.png")
    _save_contact_sheet(images, out / "contact_sheet.png")
    Image.fromarray(export_image(average_image(list(images)))).save(out / "average.png")
    _write_snapshot(out, "generate", {"ckpt": str(ckpt), "prompt": prompt, "n": n, "seed": seed, "steps": steps})
    click.echo(f"wrote {n} samples to {out}")


def _save_contact_sheet(images: np.ndarray, path: Path) -> None:
    n, h, w, _ = images.shape
    cols = int(np.ceil(np.sqrt(n)))
    rows = int(np.ceil(n / cols))
    sheet = np.zeros((rows * h, cols * w, 3), dtype=np.uint8)
    for i, img in enumerate(images):
        r, c = divmod(i, cols)
        sheet[r * h : (r + 1) * h, c * w : (c + 1) * w] = img
    Image.fromarray(sheet).save(path)


@cli.command("evaluate")
@click.option("--ckpt", type=click.Path(path_type=Path), required=True)
@click.option("--manifest", "manifest_path", type=click.Path(path_type=Path, exists=True), required=True)
@click.option("--prompt", "prompts", multiple=True, help="Defaults to all train prompts.")
@click.option("--n", "n_per_prompt", type=int, default=100, show_default=True)
@click.option("--steps", type=int, default=None)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", type=click.Path(path_type=Path), required=True)
def evaluate_cmd(ckpt, manifest_path, prompts, n_per_prompt, steps, seed, out):
    """Generate per prompt and score against the real stickers."""
    from .diffusion import load_checkpoint
    from .evaluation import evaluate

    model, schedule, _ = load_checkpoint(ckpt)
    manifest = load_manifest(manifest_path)
    prompt_list = list(prompts) or sorted({r["prompt"] for r in manifest.records})
    _write_snapshot(Path(out), "evaluate", {
        "ckpt": str(ckpt), "prompts": prompt_list, "n": n_per_prompt, "steps": steps, "seed": seed,
    })
    report = evaluate(
        model, schedule, prompt_list, manifest,
        n_per_prompt=n_per_prompt, steps=steps, seed=seed, out_dir=out,
    )
    click.echo(report.markdown())


@cli.command("average-image")
@click.argument("images", nargs=-1, type=click.Path(path_type=Path, exists=True))
@click.option("--out", type=click.Path(path_type=Path), required=True)
def average_image_cmd(images, out):
    """Average a set of image files into one PNG."""
    from .evaluation.metrics import average_image, export_image

    if not images:
        raise ValidationError("no input images given")
    arrays = [np.asarray(Image.open(p).convert("RGB")) for p in images]
    Image.fromarray(export_image(average_image(arrays))).save(out)
    click.echo(f"wrote {out}")


@cli.command("ablate")
@click.option("--axis", type=click.Choice(["lora_rank", "data_fraction", "paste_mode"]), required=True)
@click.option("--manifest", "manifest_path", type=click.Path(path_type=Path, exists=True), required=True)
@click.option("--manifest-original", type=click.Path(path_type=Path, exists=True), default=None,
              help="Original-position manifest, required for the paste_mode axis.")
@click.option("--out", type=click.Path(path_type=Path), required=True)
@click.option("--config", "config_path", type=click.Path(path_type=Path, exists=True), default=None)
@click.option("--set", "overrides", multiple=True)
@click.option("--seeds", default="0", show_default=True, help="Comma-separated seed list.")
@click.option("--n-gen", type=int, default=32, show_default=True)
@click.option("--steps", type=int, default=None)
def ablate_cmd(axis, manifest_path, manifest_original, out, config_path, overrides, seeds, n_gen, steps):
    """Run one ablation axis and emit CSV + markdown tables."""
    config = _train_config(config_path, overrides)
    manifest = load_manifest(manifest_path)
    if axis == "paste_mode":
        if manifest_original is None:
            raise ValidationError("paste_mode axis needs --manifest-original")
        manifests = {"center": manifest, "original_position": load_manifest(manifest_original)}
    else:
        manifests = manifest
    seed_list = tuple(int(s) for s in seeds.split(","))
    _write_snapshot(Path(out), "ablate", {"axis": axis, "config": config, "seeds": seed_list})
    rows = ablate(
        axis, None, config, manifests, out, seeds=seed_list, n_gen=n_gen, eval_steps=steps
    )
    for row in rows:
        click.echo(f"{row['setting']}: fid={row['fid']} ssim={row['ssim']} [{row['status']}]")


def main(argv=None) -> int:
    """Exit 0 on success, 1 on validation/usage errors, 2 on runtime failures."""
    try:
        cli.main(args=argv, standalone_mode=False)
        return 0
    except click.ClickException as exc:
        exc.show()
        return 1
    except click.Abort:
        return 1
    except ValidationError as exc:
        click.echo(f"error: {exc}", err=True)
        return 1
    except PartStickersError as exc:
        click.echo(f"error: {exc}", err=True)
        return 2
    except Exception as exc:  # runtime failure
        log.exception("unhandled failure")
        click.echo(f"error: {exc}", err=True)
        return 2


if __name__ == "__main__":
    sys.exit(main())
