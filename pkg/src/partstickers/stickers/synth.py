"""Procedural creature corpus with per-part segmentation masks.

A desk-scale stand-in for a real part-segmentation dataset: each image is a
"creature" (body ellipse, head disc, leg rectangles, tail triangle) drawn
over a textured background. Parts are drawn back-to-front and each mask
records only the pixels the part actually owns in the final image, so
occluded regions never leak into another part's mask.
"""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np
from PIL import Image, ImageDraw

from ..errors import ValidationError

OBJECT_LABEL = "creature"
PART_SET = ("body", "head", "leg", "tail")


def _textured_background(rng: np.random.Generator, size: int) -> np.ndarray:
    base = rng.integers(40, 216, size=3)
    low = rng.normal(0.0, 18.0, size=(size // 4, size // 4, 3))
    noise = np.asarray(
        Image.fromarray(np.uint8(np.clip(low + 128, 0, 255))).resize(
            (size, size), Image.BILINEAR
        ),
        dtype=np.float64,
    ) - 128.0
    return np.uint8(np.clip(base[None, None, :] + noise, 0, 255))


def _part_color(rng: np.random.Generator) -> tuple[int, int, int]:
    return tuple(int(v) for v in rng.integers(30, 226, size=3))


def _draw_creature(rng: np.random.Generator, size: int):
    """Return (rgb image, list of (part_label, mask)) for one creature."""
    background = _textured_background(rng, size)

    cx = size / 2 + rng.uniform(-size * 0.06, size * 0.06)
    cy = size / 2 + rng.uniform(-size * 0.06, size * 0.06)
    body_w = rng.uniform(0.28, 0.40) * size
    body_h = rng.uniform(0.18, 0.28) * size
    heading = rng.choice([-1, 1])  # head on the left or right

    # (label, polygon-or-ellipse spec, color), drawn in order
    shapes: list[tuple[str, str, tuple, tuple[int, int, int]]] = []

    n_legs = int(rng.integers(2, 5))
    leg_w = max(3.0, size * 0.045)
    leg_len = rng.uniform(0.16, 0.24) * size
    for i in range(n_legs):
        frac = (i + 1) / (n_legs + 1)
        lx = cx - body_w * 0.5 + frac * body_w
        ly = cy + body_h * 0.3
        shapes.append(
            ("leg", "rect", (lx - leg_w / 2, ly, lx + leg_w / 2, ly + leg_len), _part_color(rng))
        )

    tail_base_x = cx - heading * body_w * 0.48
    tail_tip_x = tail_base_x - heading * rng.uniform(0.14, 0.22) * size
    tail_tip_y = cy - rng.uniform(0.05, 0.18) * size
    shapes.append(
        (
            "tail",
            "poly",
            (
                (tail_base_x, cy - body_h * 0.18),
                (tail_base_x, cy + body_h * 0.18),
                (tail_tip_x, tail_tip_y),
            ),
            _part_color(rng),
        )
    )

    shapes.append(
        (
            "body",
            "ellipse",
            (cx - body_w / 2, cy - body_h / 2, cx + body_w / 2, cy + body_h / 2),
            _part_color(rng),
        )
    )

    head_r = rng.uniform(0.10, 0.15) * size
    hx = cx + heading * (body_w * 0.5 + head_r * 0.35)
    hy = cy - body_h * rng.uniform(0.2, 0.5)
    shapes.append(
        ("head", "ellipse", (hx - head_r, hy - head_r, hx + head_r, hy + head_r), _part_color(rng))
    )

    image = Image.fromarray(background)
    draw = ImageDraw.Draw(image)
    owner = np.zeros((size, size), dtype=np.int32)  # 0 = background
    for idx, (label, kind, spec, color) in enumerate(shapes, start=1):
        layer = Image.new("1", (size, size), 0)
        layer_draw = ImageDraw.Draw(layer)
        if kind == "ellipse":
            layer_draw.ellipse(spec, fill=1)
            draw.ellipse(spec, fill=color)
        elif kind == "rect":
            layer_draw.rectangle(spec, fill=1)
            draw.rectangle(spec, fill=color)
        else:
            layer_draw.polygon(spec, fill=1)
            draw.polygon(spec, fill=color)
        owner[np.asarray(layer, dtype=bool)] = idx

    masks = []
    for idx, (label, _, _, _) in enumerate(shapes, start=1):
        mask = (owner == idx).astype(np.uint8)
        if mask.any():
            masks.append((label, mask))
    return np.asarray(image), masks


def synth_corpus(
    seed: int,
    n_images: int,
    out: str | Path,
    image_size: int = 64,
) -> Path:
    """Write a synthetic part-segmentation dataset root; deterministic per seed."""
    if n_images < 1:
        raise ValidationError("n_images must be >= 1")
    root = Path(out)
    (root / "images").mkdir(parents=True, exist_ok=True)
    (root / "masks").mkdir(parents=True, exist_ok=True)

    rng = np.random.default_rng(seed)
    index = {"version": 1, "seed": seed, "object": OBJECT_LABEL, "images": [], "parts": []}
    for i in range(n_images):
        image_id = f"img_{i:05d}"
        rgb, masks = _draw_creature(rng, image_size)
        image_rel = f"images/{image_id}.png"
        Image.fromarray(rgb).save(root / image_rel)
        index["images"].append({"id": image_id, "path": image_rel, "object": OBJECT_LABEL})
        instance_counter: dict[str, int] = {}
        for label, mask in masks:
            instance = instance_counter.get(label, 0)
            instance_counter[label] = instance + 1
            mask_rel = f"masks/{image_id}__{label}__{instance:02d}.png"
            Image.fromarray(mask * 255).save(root / mask_rel)
            index["parts"].append(
                {"image_id": image_id, "part": label, "instance": instance, "mask": mask_rel}
            )

    with open(root / "annotations.json", "w") as f:
        json.dump(index, f, indent=1, sort_keys=True)
    return root
