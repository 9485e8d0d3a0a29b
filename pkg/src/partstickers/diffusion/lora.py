"""Low-rank adapters on the attention projections of a frozen base model."""

from __future__ import annotations

import copy
import hashlib

import torch
from torch import nn
import torch.nn.functional as F

from ..errors import ValidationError
from .unet import Attention

TARGET_TO_ATTR = {
    "q": "q_proj",
    "k": "k_proj",
    "v": "v_proj",
    "out": "out_proj",
}
DEFAULT_TARGETS = ("q", "k", "v", "out")
INIT_STD = 0.02


class LoRALinear(nn.Module):
    """W x + (alpha/r) * B(A x) with only A and B trainable.

    B starts at zero so the wrapped layer is exactly the base layer until the
    first optimizer step.
    """

    def __init__(
        self,
        base: nn.Linear,
        rank: int,
        alpha: float,
        generator: torch.Generator | None = None,
    ):
        super().__init__()
        in_f, out_f = base.in_features, base.out_features
        if not 1 <= rank <= min(in_f, out_f):
            raise ValidationError(
                f"rank {rank} outside [1, {min(in_f, out_f)}] for a {out_f}x{in_f} weight"
            )
        self.base = base
        for p in self.base.parameters():
            p.requires_grad_(False)
        self.rank = rank
        self.alpha = float(alpha)
        self.scaling = self.alpha / rank
        a = torch.randn(rank, in_f, generator=generator) * INIT_STD
        self.lora_A = nn.Parameter(a.to(base.weight.dtype))
        self.lora_B = nn.Parameter(torch.zeros(out_f, rank, dtype=base.weight.dtype))

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.base(x) + F.linear(F.linear(x, self.lora_A), self.lora_B) * self.scaling

    def delta(self) -> torch.Tensor:
        """The effective additive weight update, (alpha/r) * B @ A."""
        return self.lora_B @ self.lora_A * self.scaling

    def merged(self) -> nn.Linear:
        out = nn.Linear(
            self.base.in_features,
            self.base.out_features,
            bias=self.base.bias is not None,
        )
        with torch.no_grad():
            out.weight.copy_(self.base.weight + self.delta())
            if self.base.bias is not None:
                out.bias.copy_(self.base.bias)
        return out.to(self.base.weight.dtype)


def _resolve_targets(targets) -> list[str]:
    attrs = []
    for name in targets:
        key = name.lower()
        attr = TARGET_TO_ATTR.get(key, key if key in TARGET_TO_ATTR.values() else None)
        if attr is None:
            raise ValidationError(
                f"unknown adapter target {name!r}; expected one of {sorted(TARGET_TO_ATTR)}"
            )
        attrs.append(attr)
    return attrs


def lora_wrap(
    model: nn.Module,
    rank: int,
    alpha: float | None = None,
    targets=DEFAULT_TARGETS,
    seed: int = 0,
) -> nn.Module:
    """Attach adapters to the named projections of every attention block.

    Freezes all base parameters; afterwards only ``lora_A``/``lora_B``
    tensors require grad. Returns the same model, modified in place.
    """
    attrs = _resolve_targets(targets)
    if alpha is None:
        alpha = float(rank)
    generator = torch.Generator().manual_seed(seed)
    for p in model.parameters():
        p.requires_grad_(False)
    wrapped = 0
    for module in model.modules():
        if isinstance(module, Attention):
            for attr in attrs:
                base = getattr(module, attr)
                if isinstance(base, LoRALinear):
                    raise ValidationError("model already carries adapters")
                setattr(module, attr, LoRALinear(base, rank, alpha, generator))
                wrapped += 1
    if wrapped == 0:
        raise ValidationError("no attention projections found to adapt")
    return model


def lora_parameters(model: nn.Module):
    for module in model.modules():
        if isinstance(module, LoRALinear):
            yield module.lora_A
            yield module.lora_B


def lora_param_count(model: nn.Module) -> int:
    return sum(p.numel() for p in lora_parameters(model))


def expected_lora_param_count(model: nn.Module, rank: int, targets=DEFAULT_TARGETS) -> int:
    """Counting oracle: sum of r*(d_in + d_out) over the targeted projections."""
    attrs = _resolve_targets(targets)
    total = 0
    for module in model.modules():
        if isinstance(module, Attention):
            for attr in attrs:
                layer = getattr(module, attr)
                base = layer.base if isinstance(layer, LoRALinear) else layer
                total += rank * (base.in_features + base.out_features)
    return total


def lora_merge(model: nn.Module) -> nn.Module:
    """Fold every adapter into its base weight; returns a plain copy."""
    merged = copy.deepcopy(model)
    for module in merged.modules():
        if isinstance(module, Attention):
            for attr in TARGET_TO_ATTR.values():
                layer = getattr(module, attr)
                if isinstance(layer, LoRALinear):
                    setattr(module, attr, layer.merged())
    return merged


def lora_state_dict(model: nn.Module) -> dict[str, torch.Tensor]:
    return {
        name: tensor.detach().clone()
        for name, tensor in model.state_dict().items()
        if "lora_A" in name or "lora_B" in name
    }


def base_weight_digest(model: nn.Module) -> str:
    """SHA-256 over all non-adapter tensors, in name order.

    Wrapping inserts a ``.base`` path segment into adapted projections; it is
    stripped so digests are comparable before and after wrapping.
    """
    entries = []
    for name, tensor in model.state_dict().items():
        if "lora_A" in name or "lora_B" in name:
            continue
        entries.append((name.replace(".base.", "."), tensor))
    digest = hashlib.sha256()
    for name, tensor in sorted(entries):
        digest.update(name.encode())
        digest.update(tensor.detach().cpu().numpy().tobytes())
    return digest.hexdigest()
