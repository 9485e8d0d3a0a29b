from .config import TrainConfig, load_config_file, apply_overrides
from .loop import TrainReport, train, validate, fraction_subset
from .pretrain import pretrain, whole_object_stickers
from .ablate import ablate, ABLATION_AXES

__all__ = [
    "TrainConfig",
    "load_config_file",
    "apply_overrides",
    "TrainReport",
    "train",
    "validate",
    "fraction_subset",
    "pretrain",
    "whole_object_stickers",
    "ablate",
    "ABLATION_AXES",
]
