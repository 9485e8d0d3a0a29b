import hashlib
import json

import numpy as np
import pytest
from PIL import Image

from partstickers.errors import ValidationError
from partstickers.stickers import synth_corpus
from partstickers.stickers.synth import PART_SET


def _tree_digest(root):
    digest = hashlib.sha256()
    for path in sorted(root.rglob("*")):
        if path.is_file():
            digest.update(str(path.relative_to(root)).encode())
            digest.update(path.read_bytes())
    return digest.hexdigest()


def test_one_image_has_at_least_three_parts(tmp_path):
    root = synth_corpus(seed=0, n_images=1, out=tmp_path / "c")
    with open(root / "annotations.json") as f:
        index = json.load(f)
    assert len(index["images"]) == 1
    assert len(index["parts"]) >= 3


def test_same_seed_byte_identical(tmp_path):
    a = synth_corpus(seed=3, n_images=4, out=tmp_path / "a")
    b = synth_corpus(seed=3, n_images=4, out=tmp_path / "b")
    assert _tree_digest(a) == _tree_digest(b)


def test_different_seed_differs(tmp_path):
    a = synth_corpus(seed=3, n_images=2, out=tmp_path / "a")
    b = synth_corpus(seed=4, n_images=2, out=tmp_path / "b")
    assert _tree_digest(a) != _tree_digest(b)


def test_part_histogram_by_rereading_masks(tmp_path):
    root = synth_corpus(seed=1, n_images=50, out=tmp_path / "c")
    with open(root / "annotations.json") as f:
        index = json.load(f)
    histogram = {}
    for rec in index["parts"]:
        mask = np.asarray(Image.open(root / rec["mask"]))
        assert (mask > 0).any(), "recorded mask must be nonempty"
        histogram[rec["part"]] = histogram.get(rec["part"], 0) + 1
    assert set(histogram) == set(PART_SET)
    assert histogram["leg"] >= 50  # at least two legs per creature on average


def test_rejects_zero_images(tmp_path):
    with pytest.raises(ValidationError):
        synth_corpus(seed=0, n_images=0, out=tmp_path / "c")
