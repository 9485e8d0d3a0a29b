"""Toy text conditioning: whitespace tokenizer, learned embeddings, positions.

Stands in for the base model's text encoder, which is out of scope here. The
vocabulary is built from the training prompts; anything unseen maps to UNK.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import torch
from torch import nn

PAD_ID = 0
UNK_ID = 1


@dataclass
class Vocab:
    token_to_id: dict[str, int] = field(default_factory=dict)

    def __len__(self) -> int:
        return 2 + len(self.token_to_id)

    def id_of(self, token: str) -> int:
        return self.token_to_id.get(token, UNK_ID)


def tokenize(text: str) -> list[str]:
    return text.lower().split()


def build_vocab(prompts: list[str]) -> Vocab:
    tokens = sorted({tok for p in prompts for tok in tokenize(p)})
    return Vocab({tok: i + 2 for i, tok in enumerate(tokens)})


def _positional_encoding(max_len: int, dim: int) -> torch.Tensor:
    if dim % 2:
        raise ValueError("embedding dim must be even")
    pos = torch.arange(max_len, dtype=torch.float32).unsqueeze(1)
    freqs = torch.exp(
        torch.arange(0, dim, 2, dtype=torch.float32) * (-math.log(10000.0) / dim)
    )
    enc = torch.zeros(max_len, dim)
    enc[:, 0::2] = torch.sin(pos * freqs)
    enc[:, 1::2] = torch.cos(pos * freqs)
    return enc


class TextEncoder(nn.Module):
    """Token embedding table plus fixed sinusoidal positions.

    The table is part of the frozen base model; cross-attention adapters do
    the task-specific work on top of it.
    """

    def __init__(self, vocab: Vocab, embed_dim: int = 64, max_len: int = 8):
        super().__init__()
        self.vocab = vocab
        self.max_len = max_len
        self.embed_dim = embed_dim
        self.embedding = nn.Embedding(len(vocab), embed_dim, padding_idx=PAD_ID)
        self.register_buffer("positions", _positional_encoding(max_len, embed_dim))

    def token_ids(self, text: str) -> torch.Tensor:
        ids = [self.vocab.id_of(tok) for tok in tokenize(text)][: self.max_len]
        ids += [PAD_ID] * (self.max_len - len(ids))
        return torch.tensor(ids, dtype=torch.long)

    def forward(self, ids: torch.Tensor) -> torch.Tensor:
        # ids: (B, L) -> context (B, L, D)
        ctx = self.embedding(ids) + self.positions[: ids.shape[1]].to(
            self.embedding.weight.dtype
        )
        return ctx


def encode_prompt(text: str, conditioning: TextEncoder) -> torch.Tensor:
    """Deterministically encode a prompt into a context sequence (L, D)."""
    with torch.no_grad():
        ids = conditioning.token_ids(text).unsqueeze(0)
        return conditioning(ids).squeeze(0)
