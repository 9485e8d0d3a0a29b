"""Loading part annotations from disk.

Two layouts are supported:

* ``synthetic`` -- the layout written by :func:`partstickers.stickers.synth_corpus`:
  a root with ``annotations.json``, an ``images/`` directory, and one 0/255
  mask PNG per part instance under ``masks/``.
* ``cocopart_json`` -- a COCO-style ``annotations.json`` with polygon
  segmentations, where category names carry the part and ``supercategory``
  the object (PartImageNet-style).
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image, ImageDraw

from ..errors import IngestError, ValidationError

log = logging.getLogger(__name__)

FORMATS = ("cocopart_json", "synthetic")


@dataclass
class PartAnnotation:
    image_id: str
    object_label: str
    part_label: str
    instance: int
    mask: np.ndarray  # (H, W) uint8, values in {0, 1}
    image_path: Path


@dataclass
class IngestResult:
    """Annotations plus the count of records skipped at the record level."""

    annotations: list[PartAnnotation] = field(default_factory=list)
    skipped: int = 0

    def __iter__(self):
        return iter(self.annotations)

    def __len__(self):
        return len(self.annotations)


def load_annotations(
    dataset_root: str | Path,
    format: str,
    min_part_area: int = 16,
) -> IngestResult:
    """Load one PartAnnotation per (image, part instance).

    Records whose mask is empty (after the ``min_part_area`` filter) or whose
    mask shape disagrees with the image are skipped and counted. A missing
    mask file or image file is fatal.
    """
    root = Path(dataset_root)
    if not root.exists():
        raise IngestError(f"dataset root does not exist: {root}")
    if format not in FORMATS:
        raise ValidationError(f"unknown annotation format {format!r}; expected one of {FORMATS}")

    if format == "synthetic":
        result = _load_synthetic(root, min_part_area)
    else:
        result = _load_cocopart(root, min_part_area)

    result.annotations.sort(key=lambda a: (a.image_id, a.part_label, a.instance))
    return result


def _image_size(path: Path) -> tuple[int, int]:
    with Image.open(path) as im:
        return im.size  # (W, H)


def _load_synthetic(root: Path, min_part_area: int) -> IngestResult:
    index_path = root / "annotations.json"
    if not index_path.exists():
        raise IngestError(f"missing annotations.json under {root}")
    with open(index_path) as f:
        index = json.load(f)

    images = {rec["id"]: rec for rec in index["images"]}
    result = IngestResult()
    for rec in index["parts"]:
        image_id = rec["image_id"]
        if image_id not in images:
            raise IngestError(f"part record references unknown image {image_id!r}")
        image_rec = images[image_id]
        image_path = root / image_rec["path"]
        if not image_path.exists():
            raise IngestError(f"missing image file for record {image_id!r}: {image_path}")
        mask_path = root / rec["mask"]
        if not mask_path.exists():
            raise IngestError(
                f"missing mask file for record ({image_id!r}, {rec['part']!r}, "
                f"instance {rec['instance']}): {mask_path}"
            )
        mask = np.asarray(Image.open(mask_path).convert("L"))
        mask = (mask > 127).astype(np.uint8)
        if mask.shape[::-1] != _image_size(image_path):
            log.warning("mask/image shape mismatch for %s, skipping", mask_path)
            result.skipped += 1
            continue
        if int(mask.sum()) < max(1, min_part_area):
            result.skipped += 1
            continue
        result.annotations.append(
            PartAnnotation(
                image_id=image_id,
                object_label=image_rec["object"],
                part_label=rec["part"],
                instance=int(rec["instance"]),
                mask=mask,
                image_path=image_path,
            )
        )
    return result


def _rasterize_polygons(polygons, width: int, height: int) -> np.ndarray:
    canvas = Image.new("1", (width, height), 0)
    draw = ImageDraw.Draw(canvas)
    for poly in polygons:
        if len(poly) < 6:
            continue
        points = list(zip(poly[0::2], poly[1::2]))
        draw.polygon(points, fill=1)
    return np.asarray(canvas, dtype=np.uint8)


def _split_category(name: str, supercategory: str) -> tuple[str, str]:
    """Return (object_label, part_label) from a COCO category.

    PartImageNet names look like "Quadruped Head"; strip the supercategory
    prefix from the part when present.
    """
    obj = supercategory.strip().lower()
    part = name.strip().lower()
    if obj and part.startswith(obj + " "):
        part = part[len(obj) + 1 :]
    return obj, part


def _load_cocopart(root: Path, min_part_area: int) -> IngestResult:
    index_path = root / "annotations.json"
    if not index_path.exists():
        candidates = sorted(root.glob("*.json"))
        if not candidates:
            raise IngestError(f"no COCO json found under {root}")
        index_path = candidates[0]
    with open(index_path) as f:
        coco = json.load(f)

    images = {}
    for rec in coco["images"]:
        path = root / "images" / rec["file_name"]
        if not path.exists():
            # some exports keep files next to the json
            path = root / rec["file_name"]
        images[rec["id"]] = (Path(rec["file_name"]).stem, path, rec["width"], rec["height"])
    categories = {c["id"]: _split_category(c["name"], c.get("supercategory", "")) for c in coco["categories"]}

    result = IngestResult()
    per_image_part_counter: dict[tuple[str, str], int] = {}
    for ann in coco["annotations"]:
        if ann["image_id"] not in images:
            raise IngestError(f"annotation {ann.get('id')} references unknown image {ann['image_id']}")
        image_id, image_path, width, height = images[ann["image_id"]]
        if not image_path.exists():
            raise IngestError(f"missing image file for annotation {ann.get('id')}: {image_path}")
        obj, part = categories[ann["category_id"]]
        seg = ann.get("segmentation")
        if not seg:
            result.skipped += 1
            continue
        mask = _rasterize_polygons(seg, width, height)
        if mask.shape[::-1] != _image_size(image_path):
            log.warning("mask/image shape mismatch for annotation %s, skipping", ann.get("id"))
            result.skipped += 1
            continue
        if int(mask.sum()) < max(1, min_part_area):
            result.skipped += 1
            continue
        key = (image_id, part)
        instance = per_image_part_counter.get(key, 0)
        per_image_part_counter[key] = instance + 1
        result.annotations.append(
            PartAnnotation(
                image_id=image_id,
                object_label=obj,
                part_label=part,
                instance=instance,
                mask=mask,
                image_path=image_path,
            )
        )
    return result
