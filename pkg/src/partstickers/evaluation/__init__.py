from .ssim import ssim
from .fid import FeatureSet, fid, fid_from_moments
from .features import PixelPCAExtractor, extract_features
from .metrics import average_image, background_neutrality, centeredness, export_image, to_gray
from .report import EvalReport, evaluate

__all__ = [
    "ssim",
    "FeatureSet",
    "fid",
    "fid_from_moments",
    "PixelPCAExtractor",
    "extract_features",
    "average_image",
    "background_neutrality",
    "centeredness",
    "export_image",
    "to_gray",
    "EvalReport",
    "evaluate",
]
