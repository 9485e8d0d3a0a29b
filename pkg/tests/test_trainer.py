import dataclasses

import pytest
import torch

from partstickers.diffusion import load_checkpoint
from partstickers.errors import TrainingDiverged, ValidationError
from partstickers.training import TrainConfig, train
from partstickers.training.loop import fraction_subset

TINY = dict(
    epochs=2,
    batch_size=8,
    resolution=16,
    timesteps=20,
    base_channels=8,
    channel_multipliers=(1, 2),
    attention_resolutions=(16, 8),
    context_dim=8,
    time_embed_dim=16,
    num_heads=2,
    lora_rank=4,
    lr=1e-3,
)


def test_train_writes_best_checkpoint(tmp_path, small_manifest):
    report = train(TrainConfig(**TINY), small_manifest, tmp_path / "run")
    assert report.checkpoint_path.exists()
    assert len(report.train_losses) == 2
    assert len(report.val_losses) == 2
    assert report.best_val_loss == min(report.val_losses)
    assert report.val_losses[report.best_epoch] == report.best_val_loss
    model, schedule, meta = load_checkpoint(report.checkpoint_path)
    assert schedule.T == 20
    assert meta["lora"]["rank"] == 4
    assert meta["extra"]["epoch"] == report.best_epoch


def test_base_weights_frozen_through_training(tmp_path, small_manifest):
    report = train(TrainConfig(**TINY), small_manifest, tmp_path / "run")
    assert report.base_digest_before == report.base_digest_after


def test_training_reduces_validation_loss(tmp_path, small_manifest):
    cfg = TrainConfig(**{**TINY, "epochs": 6, "lr": 5e-3})
    report = train(cfg, small_manifest, tmp_path / "run")
    assert report.val_losses[-1] < report.val_losses[0]


def test_determinism_across_runs(tmp_path, small_manifest):
    cfg = TrainConfig(**TINY)
    a = train(cfg, small_manifest, tmp_path / "a")
    b = train(cfg, small_manifest, tmp_path / "b")
    assert a.train_losses == b.train_losses
    assert a.val_losses == b.val_losses
    sd_a = torch.load(a.checkpoint_path, weights_only=False)["state_dict"]
    sd_b = torch.load(b.checkpoint_path, weights_only=False)["state_dict"]
    assert all(torch.equal(sd_a[k], sd_b[k]) for k in sd_a)


def test_seed_changes_the_run(tmp_path, small_manifest):
    a = train(TrainConfig(**TINY), small_manifest, tmp_path / "a")
    b = train(TrainConfig(**{**TINY, "seed": 1}), small_manifest, tmp_path / "b")
    assert a.train_losses != b.train_losses


def test_divergence_is_reported_with_location(tmp_path, small_manifest):
    cfg = TrainConfig(**{**TINY, "lr": 1e12, "epochs": 3})
    with pytest.raises(TrainingDiverged) as exc_info:
        train(cfg, small_manifest, tmp_path / "run")
    assert exc_info.value.epoch >= 0
    assert exc_info.value.batch_index >= 0


def test_empty_split_rejected(tmp_path, small_manifest):
    starved = dataclasses.replace(small_manifest, records=[
        r for r in small_manifest.records if r["split"] != "val"
    ])
    with pytest.raises(ValidationError):
        train(TrainConfig(**TINY), starved, tmp_path / "run")


class TestFractionSubset:
    def _records(self, n):
        return [{"canvas_path": f"canvases/c{i:03d}.png"} for i in range(n)]

    def test_full_fraction_keeps_everything(self):
        recs = self._records(10)
        assert sorted(r["canvas_path"] for r in fraction_subset(recs, 1.0, 0)) == sorted(
            r["canvas_path"] for r in recs
        )

    def test_nesting(self):
        recs = self._records(20)
        half = {r["canvas_path"] for r in fraction_subset(recs, 0.5, 3)}
        most = {r["canvas_path"] for r in fraction_subset(recs, 0.8, 3)}
        assert half <= most
        assert len(half) == 10
        assert len(most) == 16

    def test_ceil_and_floor_behavior(self):
        recs = self._records(3)
        assert len(fraction_subset(recs, 0.5, 0)) == 2  # ceil(1.5)
        assert len(fraction_subset(recs, 0.01, 0)) == 1  # never empty

    def test_invalid_fraction(self):
        with pytest.raises(ValidationError):
            fraction_subset(self._records(3), 0.0, 0)
