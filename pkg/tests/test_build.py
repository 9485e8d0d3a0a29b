import numpy as np
import pytest
from PIL import Image

from partstickers.errors import IngestError
from partstickers.stickers import BuildConfig, build_dataset, load_manifest
from partstickers.stickers.build import manifest_digest

from conftest import write_synthetic_root

GRAY = (128, 128, 128)


def test_all_annotations_become_records(tmp_path):
    root = write_synthetic_root(tmp_path / "root", n_images=3, parts=("head", "leg"))
    manifest = build_dataset(BuildConfig(root=root, out=tmp_path / "out", canvas_size=32))
    assert len(manifest.records) == 6


def test_manifest_determinism(tmp_path):
    root = write_synthetic_root(tmp_path / "root", n_images=4)
    cfg = dict(root=root, canvas_size=32, seed=5)
    build_dataset(BuildConfig(out=tmp_path / "a", **cfg))
    build_dataset(BuildConfig(out=tmp_path / "b", **cfg))
    assert manifest_digest(tmp_path / "a") == manifest_digest(tmp_path / "b")


def test_rerun_is_idempotent(tmp_path):
    root = write_synthetic_root(tmp_path / "root", n_images=4)
    cfg = BuildConfig(root=root, out=tmp_path / "out", canvas_size=32, seed=5)
    build_dataset(cfg)
    first = manifest_digest(tmp_path / "out")
    build_dataset(cfg)
    assert manifest_digest(tmp_path / "out") == first


def test_split_ratios_round_toward_train(tmp_path):
    root = write_synthetic_root(tmp_path / "root", n_images=10, parts=("head",))
    manifest = build_dataset(
        BuildConfig(root=root, out=tmp_path / "out", canvas_size=32, splits=(0.8, 0.1, 0.1))
    )
    counts = {s: len(manifest.split(s)) for s in ("train", "val", "test")}
    assert counts == {"train": 8, "val": 1, "test": 1}


def test_no_split_leakage_across_parts(tmp_path):
    root = write_synthetic_root(tmp_path / "root", n_images=8, parts=("head", "leg"))
    manifest = build_dataset(
        BuildConfig(root=root, out=tmp_path / "out", canvas_size=32, splits=(0.5, 0.25, 0.25))
    )
    by_image = {}
    for record in manifest.records:
        by_image.setdefault(record["source_image_id"], set()).add(record["split"])
    assert all(len(splits) == 1 for splits in by_image.values())


def test_canvas_background_is_exact_gray(tmp_path):
    root = write_synthetic_root(tmp_path / "root", n_images=2)
    manifest = build_dataset(BuildConfig(root=root, out=tmp_path / "out", canvas_size=32))
    for record in manifest.records:
        canvas = np.asarray(Image.open(manifest.canvas_path(record)))
        assert canvas.shape == (32, 32, 3)
        non_gray = (canvas != np.uint8(GRAY)).any(axis=-1)
        # border ring must be pure gray for center-mode small parts
        assert not non_gray[0].any() and not non_gray[-1].any()


def test_zero_annotations_fatal(tmp_path):
    root = write_synthetic_root(tmp_path / "root", n_images=1)
    for mask_path in (root / "masks").iterdir():
        Image.fromarray(np.zeros((24, 24), dtype=np.uint8)).save(mask_path)
    with pytest.raises(IngestError):
        build_dataset(BuildConfig(root=root, out=tmp_path / "out"))


def test_load_manifest_roundtrip(tmp_path):
    root = write_synthetic_root(tmp_path / "root", n_images=3)
    built = build_dataset(BuildConfig(root=root, out=tmp_path / "out", canvas_size=32, seed=2))
    loaded = load_manifest(tmp_path / "out")
    assert loaded.canvas_size == 32
    assert loaded.seed == 2
    assert loaded.records == built.records


def test_prompt_grammar_in_manifest(tmp_path):
    import re

    root = write_synthetic_root(tmp_path / "root", n_images=2)
    manifest = build_dataset(BuildConfig(root=root, out=tmp_path / "out", canvas_size=32))
    for record in manifest.records:
        assert re.fullmatch(r"a .+ of a .+", record["prompt"])
