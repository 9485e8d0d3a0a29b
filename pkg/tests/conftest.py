import json
from pathlib import Path

import numpy as np
import pytest
import torch
from PIL import Image

from partstickers.diffusion import UNetConfig, build_model, build_vocab
from partstickers.stickers import BuildConfig, build_dataset, synth_corpus

PROMPTS = ["a body of a creature", "a head of a creature", "a leg of a creature", "a tail of a creature"]


def write_synthetic_root(root: Path, n_images: int, parts=("head", "leg"), size: int = 24):
    """Hand-rolled synthetic-layout root with one solid block per part."""
    (root / "images").mkdir(parents=True)
    (root / "masks").mkdir()
    index = {"version": 1, "seed": 0, "object": "creature", "images": [], "parts": []}
    rng = np.random.default_rng(7)
    for i in range(n_images):
        image_id = f"img_{i:05d}"
        img = rng.integers(0, 256, size=(size, size, 3), dtype=np.uint8)
        Image.fromarray(img).save(root / "images" / f"{image_id}.png")
        index["images"].append({"id": image_id, "path": f"images/{image_id}.png", "object": "creature"})
        for j, part in enumerate(parts):
            mask = np.zeros((size, size), dtype=np.uint8)
            mask[2 + 6 * j : 8 + 6 * j, 4:12] = 1  # 48 px, above the area filter
            mask_rel = f"masks/{image_id}__{part}__00.png"
            Image.fromarray(mask * 255).save(root / mask_rel)
            index["parts"].append({"image_id": image_id, "part": part, "instance": 0, "mask": mask_rel})
    with open(root / "annotations.json", "w") as f:
        json.dump(index, f)
    return root


@pytest.fixture(scope="session")
def corpus_root(tmp_path_factory):
    return synth_corpus(seed=0, n_images=8, out=tmp_path_factory.mktemp("corpus"), image_size=48)


@pytest.fixture(scope="session")
def small_manifest(corpus_root, tmp_path_factory):
    out = tmp_path_factory.mktemp("dataset")
    return build_dataset(
        BuildConfig(root=corpus_root, out=out, canvas_size=32, seed=0, splits=(0.5, 0.25, 0.25))
    )


@pytest.fixture()
def tiny_model():
    vocab = build_vocab(PROMPTS)
    config = UNetConfig(
        resolution=16,
        base_channels=8,
        channel_multipliers=(1, 2),
        attention_resolutions=(16, 8),
        context_dim=8,
        time_embed_dim=16,
        num_heads=2,
    )
    return build_model(config, vocab, seed=0)


class EpsOracle(torch.nn.Module):
    """Test stub that returns the exact noise consistent with a known x0."""

    def __init__(self, x0: torch.Tensor, schedule):
        super().__init__()
        self.x0 = x0
        self.schedule = schedule

    def forward(self, x_t, ts, token_ids=None):
        ab = self.schedule.alpha_bars.to(x_t.dtype)[ts].view(-1, *([1] * (x_t.dim() - 1)))
        return (x_t - ab.sqrt() * self.x0) / (1.0 - ab).sqrt()


class ZeroModel(torch.nn.Module):
    def forward(self, x_t, ts, token_ids=None):
        return torch.zeros_like(x_t)
