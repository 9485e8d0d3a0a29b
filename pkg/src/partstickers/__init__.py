"""Part-sticker generation toolkit: dataset construction, LoRA diffusion
fine-tuning, and evaluation, all runnable at desk scale."""

__version__ = "0.1.0"
