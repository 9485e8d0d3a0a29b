"""End-to-end evaluation: generate per prompt, score, and write reports."""

from __future__ import annotations

import json
import logging
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

from ..errors import PartStickersError, ValidationError
from ..stickers.build import DatasetManifest
from .features import PixelPCAExtractor, extract_features
from .fid import fid
from .metrics import average_image, background_neutrality, centeredness, export_image, to_gray
from .ssim import ssim

log = logging.getLogger(__name__)

DEFAULT_N_PER_PROMPT = 100


@dataclass
class PromptResult:
    prompt: str
    n_samples: int
    fid: float | None
    ssim: float | None
    neutrality: float
    center_offset_px: float
    average_image_path: str | None = None
    failed: bool = False


@dataclass
class EvalReport:
    prompts: list[PromptResult] = field(default_factory=list)
    fid_global: float | None = None
    ssim_mean: float | None = None
    neutrality_mean: float | None = None
    center_offset_mean: float | None = None
    n_per_prompt: int = DEFAULT_N_PER_PROMPT
    pairing_seed: int = 0
    extractor_id: str = "pixel_pca"

    def to_dict(self) -> dict:
        return {
            "aggregate": {
                "fid": self.fid_global,
                "ssim": self.ssim_mean,
                "neutrality": self.neutrality_mean,
                "center_offset_px": self.center_offset_mean,
            },
            "n_per_prompt": self.n_per_prompt,
            "pairing_seed": self.pairing_seed,
            "extractor_id": self.extractor_id,
            "prompts": [vars(p) for p in self.prompts],
        }

    def markdown(self) -> str:
        lines = [
            "| Prompt | FID ↓ | SSIM ↑ | Neutrality | Center offset (px) |",
            "|---|---|---|---|---|",
        ]

        def fmt(v):
            return "FAILED" if v is None else f"{v:.4f}"

        for p in self.prompts:
            if p.failed:
                lines.append(f"| {p.prompt} | FAILED | FAILED | FAILED | FAILED |")
            else:
                lines.append(
                    f"| {p.prompt} | {fmt(p.fid)} | {fmt(p.ssim)} | "
                    f"{p.neutrality:.4f} | {p.center_offset_px:.2f} |"
                )
        lines.append(
            f"| **aggregate** | {fmt(self.fid_global)} | {fmt(self.ssim_mean)} | "
            f"{fmt(self.neutrality_mean)} | {fmt(self.center_offset_mean)} |"
        )
        return "\n".join(lines)


def _load_real_images(
    manifest: DatasetManifest, prompt: str, resolution: int | None = None
) -> list[np.ndarray]:
    records = [r for r in manifest.records if r["prompt"] == prompt]
    test = [r for r in records if r["split"] == "test"]
    chosen = test if test else records
    images = []
    for r in chosen:
        img = Image.open(manifest.canvas_path(r)).convert("RGB")
        if resolution is not None and img.size != (resolution, resolution):
            img = img.resize((resolution, resolution), Image.BILINEAR)
        images.append(np.asarray(img))
    return images


def pooled_real_images(manifest: DatasetManifest, resolution: int | None = None) -> list[np.ndarray]:
    """All real stickers evaluate() would score against, pooled over prompts."""
    prompts = sorted({r["prompt"] for r in manifest.records})
    images: list[np.ndarray] = []
    for prompt in prompts:
        images.extend(_load_real_images(manifest, prompt, resolution))
    return images


def _paired_ssim(gen: list[np.ndarray], real: list[np.ndarray], seed: int) -> float:
    """Each generated image against a seeded-random real sticker of the same prompt."""
    rng = np.random.default_rng(seed)
    picks = rng.integers(0, len(real), size=len(gen))
    values = [ssim(to_gray(g), to_gray(real[int(i)])) for g, i in zip(gen, picks)]
    return float(np.mean(values))


def _cached_extractor(pooled_real, key: str) -> PixelPCAExtractor:
    """Fit the PCA basis, reusing a cache under $PARTSTICKERS_CACHE if set."""
    cache = os.environ.get("PARTSTICKERS_CACHE")
    if not cache:
        return PixelPCAExtractor().fit(pooled_real)
    path = Path(cache) / f"pixel_pca_{key}.npz"
    extractor = PixelPCAExtractor()
    if path.exists():
        data = np.load(path)
        extractor.mean = data["mean"]
        extractor.components = data["components"]
        return extractor
    extractor.fit(pooled_real)
    path.parent.mkdir(parents=True, exist_ok=True)
    np.savez(path, mean=extractor.mean, components=extractor.components)
    return extractor


def evaluate(
    model,
    schedule,
    prompts: list[str],
    manifest: DatasetManifest,
    n_per_prompt: int = DEFAULT_N_PER_PROMPT,
    steps: int | None = None,
    seed: int = 0,
    out_dir: str | Path | None = None,
    gray: tuple[int, int, int] = (128, 128, 128),
    tol: int = 12,
    pairing_seed: int = 0,
    extractor: PixelPCAExtractor | None = None,
    generator=None,
) -> EvalReport:
    """Generate per prompt, score against the real manifest, write the report.

    ``generator`` overrides sampling (signature ``(prompt, n, seed) -> uint8
    array``); the default samples from the model. Per-prompt generation
    failures are recorded and do not kill the run.
    """
    from ..diffusion.sampler import sample  # local import; evaluation is torch-free otherwise

    if not prompts:
        raise ValidationError("no prompts to evaluate")
    out_dir = Path(out_dir) if out_dir is not None else None
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)

    if generator is None:
        def generator(prompt, n, prompt_seed):
            return sample(model, prompt, schedule, steps=steps, seed=prompt_seed, n=n)

    real_by_prompt: dict[str, list[np.ndarray]] = {}
    gen_by_prompt: dict[str, np.ndarray] = {}
    report = EvalReport(n_per_prompt=n_per_prompt, pairing_seed=pairing_seed)

    for idx, prompt in enumerate(prompts):
        try:
            gen = generator(prompt, n_per_prompt, seed + idx)
        except Exception:
            log.exception("generation failed for prompt %r", prompt)
            report.prompts.append(
                PromptResult(prompt, 0, None, None, float("nan"), float("nan"), failed=True)
            )
            continue
        # real stickers are compared at the generated resolution
        real_by_prompt[prompt] = _load_real_images(manifest, prompt, gen.shape[1])
        gen_by_prompt[prompt] = gen

    # fit the feature basis on the pooled real set
    pooled_real = [img for imgs in real_by_prompt.values() for img in imgs]
    if extractor is None and pooled_real:
        import hashlib

        key = hashlib.sha256(
            repr([(p, len(v), v[0].shape) for p, v in sorted(real_by_prompt.items())]).encode()
        ).hexdigest()[:16]
        extractor = _cached_extractor(pooled_real, key)
    report.extractor_id = extractor.extractor_id if extractor else "none"

    for prompt in prompts:
        if prompt not in gen_by_prompt:
            continue  # already recorded as FAILED
        gen = gen_by_prompt[prompt]
        real = real_by_prompt[prompt]
        gen_list = list(gen)

        neutrality = float(np.mean([background_neutrality(g, gray, tol) for g in gen_list]))
        offsets = [centeredness(g, gray, tol) for g in gen_list]
        center_offset = float(np.mean(offsets))

        prompt_fid = None
        prompt_ssim = None
        if real:
            prompt_ssim = _paired_ssim(gen_list, real, pairing_seed)
            if len(real) >= 2 and len(gen_list) >= 2 and extractor is not None:
                try:
                    prompt_fid = fid(
                        extract_features(real, extractor), extract_features(gen_list, extractor)
                    )
                except PartStickersError:
                    log.exception("per-prompt distance failed for %r", prompt)

        avg_path = None
        if out_dir is not None:
            avg = export_image(average_image(gen_list))
            avg_path = str(out_dir / f"average__{prompt.replace(' ', '_')}.png")
            Image.fromarray(avg).save(avg_path)

        report.prompts.append(
            PromptResult(
                prompt=prompt,
                n_samples=len(gen_list),
                fid=prompt_fid,
                ssim=prompt_ssim,
                neutrality=neutrality,
                center_offset_px=center_offset,
                average_image_path=avg_path,
            )
        )

    ok = [p for p in report.prompts if not p.failed]
    if ok:
        report.neutrality_mean = float(np.mean([p.neutrality for p in ok]))
        report.center_offset_mean = float(np.mean([p.center_offset_px for p in ok]))
        ssims = [p.ssim for p in ok if p.ssim is not None]
        report.ssim_mean = float(np.mean(ssims)) if ssims else None

    pooled_gen = [img for gen in gen_by_prompt.values() for img in gen]
    if len(pooled_real) >= 2 and len(pooled_gen) >= 2 and extractor is not None:
        report.fid_global = fid(
            extract_features(pooled_real, extractor),
            extract_features(pooled_gen, extractor),
        )

    if out_dir is not None:
        with open(out_dir / "report.json", "w") as f:
            json.dump(report.to_dict(), f, indent=1, sort_keys=True)
        (out_dir / "report.md").write_text(report.markdown() + "\n")
    return report
