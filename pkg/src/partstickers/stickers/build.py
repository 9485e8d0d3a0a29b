"""Dataset construction: annotations in, sticker canvases + manifest out."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

from ..errors import IngestError, ValidationError
from .annotations import load_annotations
from .compose import compose_sticker, extract_part, make_prompt

MANIFEST_NAME = "manifest.jsonl"
MANIFEST_VERSION = 1


@dataclass
class BuildConfig:
    root: Path
    out: Path
    format: str = "synthetic"
    canvas_size: int = 64
    gray: tuple[int, int, int] = (128, 128, 128)
    mode: str = "center"
    splits: tuple[float, float, float] = (0.8, 0.1, 0.1)
    seed: int = 0
    min_part_area: int = 16
    scale_policy: str = "fit"

    def __post_init__(self):
        self.root = Path(self.root)
        self.out = Path(self.out)
        if abs(sum(self.splits) - 1.0) > 1e-9:
            raise ValidationError(f"split ratios must sum to 1, got {self.splits}")


@dataclass
class DatasetManifest:
    canvas_size: int
    gray: tuple[int, int, int]
    seed: int
    records: list[dict] = field(default_factory=list)
    root: Path | None = None  # directory the canvas paths are relative to

    def split(self, name: str) -> list[dict]:
        return [r for r in self.records if r["split"] == name]

    def canvas_path(self, record: dict) -> Path:
        base = self.root if self.root is not None else Path(".")
        return base / record["canvas_path"]


def _split_assignment(image_ids: list[str], splits, seed: int) -> dict[str, str]:
    """Assign whole images to splits.

    Images are ordered by a seeded hash (so assignment is deterministic and
    all parts of one image share a split), then the ordered list is cut by
    the configured ratios with rounding toward train.
    """
    unique = sorted(set(image_ids))
    keyed = sorted(
        unique,
        key=lambda i: hashlib.sha256(f"{seed}:{i}".encode()).hexdigest(),
    )
    n = len(keyed)
    n_val = int(n * splits[1])
    n_test = int(n * splits[2])
    n_train = n - n_val - n_test
    assignment = {}
    for idx, image_id in enumerate(keyed):
        if idx < n_train:
            assignment[image_id] = "train"
        elif idx < n_train + n_val:
            assignment[image_id] = "val"
        else:
            assignment[image_id] = "test"
    return assignment


def build_dataset(config: BuildConfig) -> DatasetManifest:
    """Compose every surviving annotation into a sticker and write the manifest.

    Deterministic: rerunning with identical inputs and config reproduces the
    manifest byte for byte.
    """
    result = load_annotations(config.root, config.format, config.min_part_area)
    if not result.annotations:
        raise IngestError("no annotations survived filtering; nothing to build")

    out = config.out
    try:
        (out / "canvases").mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise IngestError(f"cannot create output directory {out}: {exc}") from exc

    assignment = _split_assignment(
        [a.image_id for a in result.annotations], config.splits, config.seed
    )

    manifest = DatasetManifest(
        canvas_size=config.canvas_size,
        gray=config.gray,
        seed=config.seed,
        root=out,
    )
    image_cache: dict[Path, np.ndarray] = {}
    for ann in result.annotations:
        if ann.image_path not in image_cache:
            image_cache[ann.image_path] = np.asarray(
                Image.open(ann.image_path).convert("RGB")
            )
        image = image_cache[ann.image_path]
        region = extract_part(image, ann.mask)
        canvas = compose_sticker(
            region,
            canvas_size=config.canvas_size,
            gray=config.gray,
            mode=config.mode,
            scale_policy=config.scale_policy,
        )
        rel = f"canvases/{ann.image_id}__{ann.part_label}__{ann.instance:02d}.png"
        Image.fromarray(canvas).save(out / rel)
        manifest.records.append(
            {
                "canvas_path": rel,
                "prompt": make_prompt(ann.part_label, ann.object_label),
                "object": ann.object_label,
                "part": ann.part_label,
                "split": assignment[ann.image_id],
                "mode": config.mode,
                "source_image_id": ann.image_id,
            }
        )

    _write_manifest(out / MANIFEST_NAME, manifest)
    return manifest


def _write_manifest(path: Path, manifest: DatasetManifest) -> None:
    header = {
        "canvas_size": manifest.canvas_size,
        "gray": list(manifest.gray),
        "seed": manifest.seed,
        "version": MANIFEST_VERSION,
    }
    with open(path, "w") as f:
        f.write(json.dumps(header, sort_keys=True) + "\n")
        for record in manifest.records:
            f.write(json.dumps(record, sort_keys=True) + "\n")


def load_manifest(path: str | Path) -> DatasetManifest:
    path = Path(path)
    if path.is_dir():
        path = path / MANIFEST_NAME
    with open(path) as f:
        lines = [line for line in f if line.strip()]
    if not lines:
        raise IngestError(f"empty manifest: {path}")
    header = json.loads(lines[0])
    return DatasetManifest(
        canvas_size=header["canvas_size"],
        gray=tuple(header["gray"]),
        seed=header["seed"],
        records=[json.loads(line) for line in lines[1:]],
        root=path.parent,
    )


def manifest_digest(path: str | Path) -> str:
    path = Path(path)
    if path.is_dir():
        path = path / MANIFEST_NAME
    return hashlib.sha256(path.read_bytes()).hexdigest()
