from __future__ import annotations

import math
from typing import Sequence

import numpy as np
import torch
from torch import nn

from ..corpus import OUTSIDE, TRACK_NAMES
from .config import TaggerConfig
from .crf import crf_log_partition, crf_path_score
from .layers import UNK_ID, EncoderBlock, embed, transformer_block


class CRFHead(nn.Module):
    """Emission projection plus CRF transition/start/end scores for one task."""

    def __init__(self, hidden: int, num_labels: int) -> None:
        super().__init__()
        f64 = dict(dtype=torch.float64)
        self.proj = nn.Parameter(torch.zeros(hidden, num_labels, **f64))
        self.proj_bias = nn.Parameter(torch.zeros(num_labels, **f64))
        self.transitions = nn.Parameter(torch.zeros(num_labels, num_labels, **f64))
        self.start = nn.Parameter(torch.zeros(num_labels, **f64))
        self.end = nn.Parameter(torch.zeros(num_labels, **f64))

    def emissions(self, hidden: torch.Tensor) -> torch.Tensor:
        return hidden @ self.proj + self.proj_bias

    def nll(self, emissions: torch.Tensor, tags: torch.Tensor, mask: torch.Tensor) -> torch.Tensor:
        log_z = crf_log_partition(emissions, self.transitions, self.start, self.end, mask)
        gold = crf_path_score(emissions, tags, self.transitions, self.start, self.end, mask)
        return log_z - gold

    def numpy_params(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        return tuple(p.detach().numpy() for p in (self.transitions, self.start, self.end))


class TaggerModel(nn.Module):
    """Embeddings, a post-norm Transformer stack and one CRF head per tagging task.

    ``label_sets[t]`` lists the labels of task ``t``; index 0 is always ``O``.
    """

    def __init__(self, config: TaggerConfig, label_sets: Sequence[Sequence[str]]) -> None:
        super().__init__()
        if len(label_sets) != len(TRACK_NAMES):
            raise ValueError(f"need {len(TRACK_NAMES)} label sets, got {len(label_sets)}")
        for labels in label_sets:
            if not labels or labels[0] != OUTSIDE:
                raise ValueError("each label set must start with 'O'")
        self.config = config
        self.label_sets = [list(labels) for labels in label_sets]
        self.label_index = [{label: i for i, label in enumerate(labels)} for labels in self.label_sets]
        f64 = dict(dtype=torch.float64)
        self.token_emb = nn.Parameter(torch.zeros(config.vocab_size, config.hidden, **f64))
        self.pos_emb = nn.Parameter(torch.zeros(config.max_seq_len, config.hidden, **f64))
        self.blocks = nn.ModuleList(EncoderBlock(config.hidden, config.ffn_dims) for _ in range(config.num_layers))
        self.heads = nn.ModuleList(CRFHead(config.hidden, len(labels)) for labels in self.label_sets)
        self.dropout_gen: torch.Generator | None = None

    @classmethod
    def initialized(cls, config: TaggerConfig, label_sets: Sequence[Sequence[str]]) -> TaggerModel:
        """Seeded initialization: normal embeddings, Xavier-uniform projections."""
        model = cls(config, label_sets)
        gen = torch.Generator().manual_seed(config.seed)
        with torch.no_grad():
            for name, param in model.named_parameters():
                leaf = name.rsplit(".", 1)[-1]
                if leaf in ("token_emb", "pos_emb"):
                    param.normal_(0.0, config.init_std, generator=gen)
                elif param.dim() == 2 and leaf != "transitions":
                    bound = math.sqrt(6.0 / (param.shape[0] + param.shape[1]))
                    param.uniform_(-bound, bound, generator=gen)
        return model

    def _dropout(self, x: torch.Tensor) -> torch.Tensor:
        p = self.config.dropout
        keep = torch.rand(x.shape, generator=self.dropout_gen, dtype=x.dtype) >= p
        return x * keep / (1.0 - p)

    def encode(self, token_ids: torch.Tensor, mask: torch.Tensor | None = None) -> torch.Tensor:
        """Hidden states. Dropout is active only in training mode with ``dropout_gen`` set."""
        token_ids = torch.as_tensor(token_ids, dtype=torch.long)
        stochastic = self.training and self.dropout_gen is not None
        if stochastic and self.config.word_dropout > 0:
            hit = torch.rand(token_ids.shape, generator=self.dropout_gen) < self.config.word_dropout
            token_ids = torch.where(hit & (token_ids > UNK_ID), torch.full_like(token_ids, UNK_ID), token_ids)
        x = embed(token_ids, self.token_emb, self.pos_emb)
        drop = self._dropout if stochastic and self.config.dropout > 0 else None
        if drop is not None:
            x = drop(x)
        for block in self.blocks:
            x = transformer_block(x, block, self.config.num_heads, mask, self.config.layer_norm_eps, drop)
        return x

    def emissions(self, token_ids: torch.Tensor, mask: torch.Tensor | None = None) -> list[torch.Tensor]:
        hidden = self.encode(token_ids, mask)
        return [head.emissions(hidden) for head in self.heads]

    def loss(self, token_ids: torch.Tensor, tags: Sequence[torch.Tensor], mask: torch.Tensor) -> torch.Tensor:
        """Mean over the batch of the summed per-task CRF negative log-likelihoods."""
        emissions = self.emissions(token_ids, mask)
        total = sum(head.nll(em, tg, mask) for head, em, tg in zip(self.heads, emissions, tags))
        return total.mean()

    def forward(self, token_ids: torch.Tensor, tags: Sequence[torch.Tensor], mask: torch.Tensor) -> torch.Tensor:
        return self.loss(token_ids, tags, mask)

    def encode_labels(self, tracks: Sequence[Sequence[str]]) -> list[list[int]]:
        """Label strings to ids; labels unseen in training fall back to ``O``."""
        return [[index.get(label, 0) for label in track] for index, track in zip(self.label_index, tracks)]
