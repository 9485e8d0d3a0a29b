from .annotations import PartAnnotation, IngestResult, load_annotations
from .compose import MaskedRegion, extract_part, compose_sticker, make_prompt
from .build import BuildConfig, DatasetManifest, build_dataset, load_manifest
from .synth import synth_corpus

__all__ = [
    "PartAnnotation",
    "IngestResult",
    "load_annotations",
    "MaskedRegion",
    "extract_part",
    "compose_sticker",
    "make_prompt",
    "BuildConfig",
    "DatasetManifest",
    "build_dataset",
    "load_manifest",
    "synth_corpus",
]
