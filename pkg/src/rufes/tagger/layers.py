"""Functional Transformer-encoder pieces operating on float64 tensors.

All functions accept an optional leading batch dimension. ``key_mask`` marks
real (non-padding) positions with True.
"""

from __future__ import annotations

import math
from typing import Callable

import torch
from torch import nn

PAD_ID = 0
UNK_ID = 1


def embed(token_ids: torch.Tensor, token_emb: torch.Tensor, pos_emb: torch.Tensor) -> torch.Tensor:
    """Token embedding plus learned absolute position embedding.

    Ids outside the vocabulary map to UNK; sequences longer than the position
    table are truncated.
    """
    token_ids = torch.as_tensor(token_ids, dtype=torch.long)
    max_len = pos_emb.shape[0]
    token_ids = token_ids[..., :max_len]
    token_ids = torch.where((token_ids >= token_emb.shape[0]) | (token_ids < 0),
                            torch.full_like(token_ids, UNK_ID), token_ids)
    length = token_ids.shape[-1]
    return token_emb[token_ids] + pos_emb[:length]


def gelu(x: torch.Tensor) -> torch.Tensor:
    return 0.5 * x * (1.0 + torch.erf(x / math.sqrt(2.0)))


def layer_norm(x: torch.Tensor, gain: torch.Tensor, bias: torch.Tensor, eps: float = 1e-5) -> torch.Tensor:
    mean = x.mean(dim=-1, keepdim=True)
    var = ((x - mean) ** 2).mean(dim=-1, keepdim=True)
    return (x - mean) / torch.sqrt(var + eps) * gain + bias


class EncoderBlock(nn.Module):
    """Parameters of one encoder layer (projections stored input-major: ``x @ W``)."""

    def __init__(self, hidden: int, ffn_dims: int) -> None:
        super().__init__()
        f64 = dict(dtype=torch.float64)
        for name in ("wq", "wk", "wv", "wo"):
            setattr(self, name, nn.Parameter(torch.zeros(hidden, hidden, **f64)))
        for name in ("bq", "bk", "bv", "bo"):
            setattr(self, name, nn.Parameter(torch.zeros(hidden, **f64)))
        self.w1 = nn.Parameter(torch.zeros(hidden, ffn_dims, **f64))
        self.b1 = nn.Parameter(torch.zeros(ffn_dims, **f64))
        self.w2 = nn.Parameter(torch.zeros(ffn_dims, hidden, **f64))
        self.b2 = nn.Parameter(torch.zeros(hidden, **f64))
        self.ln1_gain = nn.Parameter(torch.ones(hidden, **f64))
        self.ln1_bias = nn.Parameter(torch.zeros(hidden, **f64))
        self.ln2_gain = nn.Parameter(torch.ones(hidden, **f64))
        self.ln2_bias = nn.Parameter(torch.zeros(hidden, **f64))


def multi_head_attention(x: torch.Tensor, block: EncoderBlock, num_heads: int,
                         key_mask: torch.Tensor | None = None) -> torch.Tensor:
    *lead, length, hidden = x.shape
    head_dim = hidden // num_heads

    def heads(t: torch.Tensor) -> torch.Tensor:
        return t.reshape(*lead, length, num_heads, head_dim).transpose(-3, -2)

    q = heads(x @ block.wq + block.bq)
    k = heads(x @ block.wk + block.bk)
    v = heads(x @ block.wv + block.bv)
    scores = q @ k.transpose(-1, -2) / math.sqrt(head_dim)
    if key_mask is not None:
        scores = scores.masked_fill(~key_mask[..., None, None, :], float("-inf"))
    weights = torch.softmax(scores, dim=-1)
    context = (weights @ v).transpose(-3, -2).reshape(*lead, length, hidden)
    return context @ block.wo + block.bo


def feed_forward(x: torch.Tensor, block: EncoderBlock) -> torch.Tensor:
    return gelu(x @ block.w1 + block.b1) @ block.w2 + block.b2


def transformer_block(x: torch.Tensor, block: EncoderBlock, num_heads: int,
                      key_mask: torch.Tensor | None = None, eps: float = 1e-5,
                      dropout: Callable[[torch.Tensor], torch.Tensor] | None = None) -> torch.Tensor:
    """Post-norm encoder layer: residual around each sub-layer, then layer norm.

    ``dropout``, when given, is applied to each sub-layer output before the
    residual addition (training only).
    """
    drop = dropout or (lambda t: t)
    x = layer_norm(x + drop(multi_head_attention(x, block, num_heads, key_mask)),
                   block.ln1_gain, block.ln1_bias, eps)
    return layer_norm(x + drop(feed_forward(x, block)), block.ln2_gain, block.ln2_bias, eps)
