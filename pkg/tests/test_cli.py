import json

import numpy as np
from PIL import Image

from partstickers.cli import main


def test_synth_and_build_pipeline(tmp_path, capsys):
    corpus = tmp_path / "corpus"
    assert main(["synth", "--seed", "0", "--n", "2", "--out", str(corpus), "--image-size", "48"]) == 0
    assert (corpus / "annotations.json").exists()
    assert (corpus / "synth.resolved.json").exists()

    dataset = tmp_path / "dataset"
    code = main([
        "build-dataset", "--root", str(corpus), "--out", str(dataset), "--canvas-size", "32",
    ])
    assert code == 0
    assert (dataset / "manifest.jsonl").exists()
    out = capsys.readouterr().out
    assert "built" in out


def test_build_determinism_via_cli(tmp_path):
    corpus = tmp_path / "corpus"
    main(["synth", "--seed", "1", "--n", "2", "--out", str(corpus), "--image-size", "48"])
    args = ["build-dataset", "--root", str(corpus), "--canvas-size", "32", "--seed", "3"]
    assert main(args + ["--out", str(tmp_path / "a")]) == 0
    assert main(args + ["--out", str(tmp_path / "b")]) == 0
    a = (tmp_path / "a" / "manifest.jsonl").read_bytes()
    b = (tmp_path / "b" / "manifest.jsonl").read_bytes()
    assert a == b


def test_train_generate_evaluate_smoke(tmp_path):
    corpus = tmp_path / "corpus"
    dataset = tmp_path / "dataset"
    main(["synth", "--seed", "0", "--n", "10", "--out", str(corpus), "--image-size", "48"])
    main(["build-dataset", "--root", str(corpus), "--out", str(dataset), "--canvas-size", "32"])

    run = tmp_path / "run"
    code = main([
        "train", "--manifest", str(dataset), "--out", str(run), "--epochs", "1",
        "--set", "resolution=16", "--set", "timesteps=10", "--set", "base_channels=8",
        "--set", "attention_resolutions=16,8", "--set", "context_dim=8",
        "--set", "time_embed_dim=16", "--set", "num_heads=2", "--set", "lora_rank=2",
    ])
    assert code == 0
    ckpt = run / "checkpoint.pt"
    assert ckpt.exists()
    snapshot = json.loads((run / "train.resolved.json").read_text())
    assert snapshot["config"]["epochs"] == 1
    assert snapshot["config"]["resolution"] == 16

    gen = tmp_path / "gen"
    code = main([
        "generate", "--ckpt", str(ckpt), "--prompt", "a head of a creature",
        "--n", "3", "--steps", "3", "--out", str(gen),
    ])
    assert code == 0
    assert len(list(gen.glob("sample_*.png"))) == 3
    assert (gen / "contact_sheet.png").exists()
    assert (gen / "average.png").exists()

    ev = tmp_path / "eval"
    code = main([
        "evaluate", "--ckpt", str(ckpt), "--manifest", str(dataset),
        "--prompt", "a head of a creature", "--n", "3", "--steps", "3", "--out", str(ev),
    ])
    assert code == 0
    report = json.loads((ev / "report.json").read_text())
    assert report["prompts"][0]["n_samples"] == 3


def test_pretrain_then_train_from_base(tmp_path):
    corpus = tmp_path / "corpus"
    dataset = tmp_path / "dataset"
    main(["synth", "--seed", "0", "--n", "10", "--out", str(corpus), "--image-size", "48"])
    main(["build-dataset", "--root", str(corpus), "--out", str(dataset), "--canvas-size", "32"])

    tiny = [
        "--set", "resolution=16", "--set", "timesteps=10", "--set", "base_channels=8",
        "--set", "attention_resolutions=16,8", "--set", "context_dim=8",
        "--set", "time_embed_dim=16", "--set", "num_heads=2", "--set", "lora_rank=2",
    ]
    base = tmp_path / "base"
    assert main(["pretrain", "--root", str(corpus), "--out", str(base), "--epochs", "1", *tiny]) == 0
    assert (base / "base.pt").exists()
    assert (base / "pretrain.resolved.json").exists()

    run = tmp_path / "run"
    code = main([
        "train", "--manifest", str(dataset), "--out", str(run), "--epochs", "1",
        "--base", str(base / "base.pt"), *tiny,
    ])
    assert code == 0
    snapshot = json.loads((run / "train.resolved.json").read_text())
    assert snapshot["config"]["base_checkpoint"] == str(base / "base.pt")


def test_generate_determinism(tmp_path):
    corpus = tmp_path / "corpus"
    dataset = tmp_path / "dataset"
    main(["synth", "--seed", "0", "--n", "10", "--out", str(corpus), "--image-size", "48"])
    main(["build-dataset", "--root", str(corpus), "--out", str(dataset), "--canvas-size", "32"])
    run = tmp_path / "run"
    main([
        "train", "--manifest", str(dataset), "--out", str(run), "--epochs", "1",
        "--set", "resolution=16", "--set", "timesteps=10", "--set", "base_channels=8",
        "--set", "attention_resolutions=16,8", "--set", "context_dim=8",
        "--set", "time_embed_dim=16", "--set", "num_heads=2", "--set", "lora_rank=2",
    ])
    args = ["generate", "--ckpt", str(run / "checkpoint.pt"), "--prompt", "a leg of a creature",
            "--n", "2", "--steps", "3", "--seed", "5"]
    main(args + ["--out", str(tmp_path / "g1")])
    main(args + ["--out", str(tmp_path / "g2")])
    a = np.asarray(Image.open(tmp_path / "g1" / "sample_0000.png"))
    b = np.asarray(Image.open(tmp_path / "g2" / "sample_0000.png"))
    assert np.array_equal(a, b)


def test_average_image_command(tmp_path):
    paths = []
    for i, value in enumerate((0, 100)):
        p = tmp_path / f"in{i}.png"
        Image.fromarray(np.full((8, 8, 3), value, dtype=np.uint8)).save(p)
        paths.append(str(p))
    out = tmp_path / "avg.png"
    assert main(["average-image", *paths, "--out", str(out)]) == 0
    assert (np.asarray(Image.open(out)) == 50).all()


class TestExitCodes:
    def test_usage_error_is_one(self):
        assert main(["train", "--out", "/tmp/x"]) == 1  # missing --manifest

    def test_unknown_command_is_one(self):
        assert main(["frobnicate"]) == 1

    def test_validation_error_is_one(self, tmp_path):
        (tmp_path / "empty").mkdir()
        assert main([
            "train", "--manifest", str(tmp_path / "empty"), "--out", str(tmp_path / "o"),
        ]) in (1, 2)

    def test_missing_checkpoint_is_one(self, tmp_path):
        code = main([
            "generate", "--ckpt", str(tmp_path / "nope.pt"), "--prompt", "a leg of a dog",
            "--n", "1", "--out", str(tmp_path / "g"),
        ])
        assert code == 1

    def test_bad_override_is_one(self, tmp_path):
        corpus = tmp_path / "corpus"
        dataset = tmp_path / "dataset"
        main(["synth", "--seed", "0", "--n", "2", "--out", str(corpus), "--image-size", "48"])
        main(["build-dataset", "--root", str(corpus), "--out", str(dataset), "--canvas-size", "32"])
        assert main([
            "train", "--manifest", str(dataset), "--out", str(tmp_path / "o"),
            "--set", "not_a_key=3",
        ]) == 1
