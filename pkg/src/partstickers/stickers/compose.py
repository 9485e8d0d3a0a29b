"""Cutting parts out of images and pasting them onto neutral canvases."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from PIL import Image

from ..errors import EmptyPartError, ValidationError

PASTE_MODES = ("center", "original_position")
SCALE_POLICIES = ("fit", "forbid")

# Margin kept between a downscaled part and the canvas edge.
FIT_MARGIN = 4


@dataclass
class MaskedRegion:
    """A part cut to its tight bounding box.

    ``rgb`` keeps the original pixels where ``alpha`` is True; alpha-False
    pixels are background and never land on a canvas.
    """

    rgb: np.ndarray  # (h, w, 3) uint8
    alpha: np.ndarray  # (h, w) bool
    bbox: tuple[int, int, int, int]  # x, y, w, h in source coordinates
    source_size: tuple[int, int]  # (W, H) of the source frame


def extract_part(image: np.ndarray, mask: np.ndarray) -> MaskedRegion:
    """Cut the masked region out of ``image`` at its tight bounding box."""
    image = np.asarray(image)
    mask = np.asarray(mask)
    if image.shape[:2] != mask.shape:
        raise ValidationError(
            f"image {image.shape[:2]} and mask {mask.shape} dimensions differ"
        )
    ys, xs = np.nonzero(mask)
    if ys.size == 0:
        raise EmptyPartError("empty part")
    y0, y1 = int(ys.min()), int(ys.max()) + 1
    x0, x1 = int(xs.min()), int(xs.max()) + 1
    return MaskedRegion(
        rgb=np.ascontiguousarray(image[y0:y1, x0:x1]),
        alpha=mask[y0:y1, x0:x1].astype(bool),
        bbox=(x0, y0, x1 - x0, y1 - y0),
        source_size=(image.shape[1], image.shape[0]),
    )


def _resize_region(region: MaskedRegion, new_w: int, new_h: int) -> tuple[np.ndarray, np.ndarray]:
    """Bilinear for content, nearest for the mask."""
    new_w, new_h = max(1, new_w), max(1, new_h)
    rgb = np.asarray(
        Image.fromarray(region.rgb).resize((new_w, new_h), Image.BILINEAR)
    )
    alpha = np.asarray(
        Image.fromarray(region.alpha.astype(np.uint8) * 255).resize(
            (new_w, new_h), Image.NEAREST
        )
    ) > 127
    return rgb, alpha


def compose_sticker(
    region: MaskedRegion,
    canvas_size: int,
    gray: tuple[int, int, int] = (128, 128, 128),
    mode: str = "center",
    original_offset: tuple[int, int] | None = None,
    scale_policy: str = "fit",
) -> np.ndarray:
    """Paste a masked region onto a square neutral canvas.

    ``center`` puts the region's bounding-box center at the canvas center.
    ``original_position`` rescales the source frame uniformly to
    ``canvas_size`` and places the region at its rescaled source offset.
    Every pixel outside the pasted mask equals ``gray`` exactly.
    """
    if canvas_size <= 0:
        raise ValidationError("canvas_size must be positive")
    if mode not in PASTE_MODES:
        raise ValidationError(f"unknown paste mode {mode!r}")
    if scale_policy not in SCALE_POLICIES:
        raise ValidationError(f"unknown scale policy {scale_policy!r}")

    canvas = np.empty((canvas_size, canvas_size, 3), dtype=np.uint8)
    canvas[:] = np.asarray(gray, dtype=np.uint8)

    rgb, alpha = region.rgb, region.alpha
    h, w = alpha.shape

    if mode == "center":
        if h > canvas_size or w > canvas_size:
            if scale_policy == "forbid":
                raise ValidationError(
                    f"region {w}x{h} exceeds canvas {canvas_size} and scaling is forbidden"
                )
            scale = (canvas_size - 2 * FIT_MARGIN) / max(h, w)
            rgb, alpha = _resize_region(region, round(w * scale), round(h * scale))
            h, w = alpha.shape
        # ceil split: a 1px part on an even canvas lands at S/2, not S/2 - 1
        x0 = (canvas_size - w + 1) // 2
        y0 = (canvas_size - h + 1) // 2
    else:
        if original_offset is None:
            original_offset = region.bbox[:2]
        src_w, src_h = region.source_size
        scale = canvas_size / max(src_w, src_h)
        new_w, new_h = round(w * scale), round(h * scale)
        if scale != 1.0:
            rgb, alpha = _resize_region(region, new_w, new_h)
            h, w = alpha.shape
        x0 = round(original_offset[0] * scale)
        y0 = round(original_offset[1] * scale)

    # clip to the canvas; original_position can touch the border
    cx0, cy0 = max(0, x0), max(0, y0)
    cx1, cy1 = min(canvas_size, x0 + w), min(canvas_size, y0 + h)
    if cx0 >= cx1 or cy0 >= cy1:
        return canvas
    sub_rgb = rgb[cy0 - y0 : cy1 - y0, cx0 - x0 : cx1 - x0]
    sub_alpha = alpha[cy0 - y0 : cy1 - y0, cx0 - x0 : cx1 - x0]
    target = canvas[cy0:cy1, cx0:cx1]
    target[sub_alpha] = sub_rgb[sub_alpha]
    return canvas


def make_prompt(part_label: str, object_label: str) -> str:
    """Build the training prompt for an (object, part) pair.

    The template is literal; no article agreement is attempted.
    """
    part = part_label.strip().lower()
    obj = object_label.strip().lower()
    if not part or not obj:
        raise ValidationError("part and object labels must be nonempty")
    return f"a {part} of a {obj}"
