from .schedule import NoiseSchedule, make_schedule, forward_step, forward_diffuse
from .text import Vocab, TextEncoder, build_vocab, encode_prompt
from .unet import UNetConfig, ConditionedDenoiser, build_model
from .lora import (
    LoRALinear,
    lora_wrap,
    lora_merge,
    lora_parameters,
    lora_param_count,
    expected_lora_param_count,
    base_weight_digest,
)
from .losses import denoise_loss
from .sampler import reverse_step, sample, sample_latents, decode_latent, encode_image
from .checkpoint import save_checkpoint, load_checkpoint, export_adapter

__all__ = [
    "NoiseSchedule",
    "make_schedule",
    "forward_step",
    "forward_diffuse",
    "Vocab",
    "TextEncoder",
    "build_vocab",
    "encode_prompt",
    "UNetConfig",
    "ConditionedDenoiser",
    "build_model",
    "LoRALinear",
    "lora_wrap",
    "lora_merge",
    "lora_parameters",
    "lora_param_count",
    "expected_lora_param_count",
    "base_weight_digest",
    "denoise_loss",
    "reverse_step",
    "sample",
    "sample_latents",
    "decode_latent",
    "encode_image",
    "save_checkpoint",
    "load_checkpoint",
    "export_adapter",
]
