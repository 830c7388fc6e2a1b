from __future__ import annotations

import logging
from typing import Sequence

import numpy as np
import torch

from ..corpus import OUTSIDE, TRACK_NAMES, split_label
from .config import TaggerConfig
from .model import TaggerModel

logger = logging.getLogger(__name__)

# One training sentence: token ids and one label sequence per task.
Example = tuple[Sequence[int], Sequence[Sequence[str]]]


class TrainingDiverged(RuntimeError):
    pass


def build_label_sets(corpus: Sequence[Example]) -> list[list[str]]:
    names: list[set[str]] = [set() for _ in TRACK_NAMES]
    for _, tracks in corpus:
        for t, track in enumerate(tracks):
            names[t].update(name for name in (split_label(lab)[1] for lab in track) if name)
    return [[OUTSIDE] + [f"{p}-{n}" for n in sorted(ns) for p in ("B", "I")] for ns in names]


def windows(length: int, size: int) -> list[tuple[int, int]]:
    """Non-overlapping ``[start, stop)`` chunks covering ``range(length)``."""
    return [(i, min(i + size, length)) for i in range(0, length, size)]


def _split_long(corpus: Sequence[Example], max_len: int) -> list[Example]:
    out = []
    for ids, tracks in corpus:
        if not len(ids):
            continue
        for lo, hi in windows(len(ids), max_len):
            out.append((list(ids[lo:hi]), [list(track[lo:hi]) for track in tracks]))
    return out


def _batch(model: TaggerModel, examples: Sequence[Example]):
    width = max(len(ids) for ids, _ in examples)
    token_ids = torch.zeros(len(examples), width, dtype=torch.long)
    mask = torch.zeros(len(examples), width, dtype=torch.bool)
    tags = [torch.zeros(len(examples), width, dtype=torch.long) for _ in TRACK_NAMES]
    for b, (ids, tracks) in enumerate(examples):
        n = len(ids)
        token_ids[b, :n] = torch.as_tensor(list(ids), dtype=torch.long)
        mask[b, :n] = True
        for t, encoded in enumerate(model.encode_labels(tracks)):
            tags[t][b, :n] = torch.as_tensor(encoded, dtype=torch.long)
    return token_ids, tags, mask


def make_optimizer(model: TaggerModel, cfg: TaggerConfig) -> torch.optim.AdamW:
    decay = [p for p in model.parameters() if p.dim() >= 2]
    no_decay = [p for p in model.parameters() if p.dim() < 2]
    return torch.optim.AdamW(
        [{"params": decay, "weight_decay": cfg.weight_decay}, {"params": no_decay, "weight_decay": 0.0}],
        lr=cfg.learning_rate,
    )


def train(corpus: Sequence[Example], cfg: TaggerConfig,
          label_sets: Sequence[Sequence[str]] | None = None) -> TaggerModel:
    """Fit a tagger with AdamW on the summed CRF negative log-likelihood of all tasks.

    Deterministic for a fixed config (including seed) and corpus order. The
    mean loss of each epoch is kept in ``model.loss_history``.
    """
    if not corpus:
        raise ValueError("training corpus is empty")
    examples = _split_long(corpus, cfg.max_seq_len)
    if label_sets is None:
        label_sets = build_label_sets(examples)
    model = TaggerModel.initialized(cfg, label_sets)
    optimizer = make_optimizer(model, cfg)
    rng = np.random.default_rng(cfg.seed)
    model.loss_history = []
    model.dropout_gen = torch.Generator().manual_seed(cfg.seed + 1)

    model.train()
    for epoch in range(cfg.epochs):
        order = rng.permutation(len(examples))
        epoch_loss = 0.0
        for b, lo in enumerate(range(0, len(order), cfg.batch_size)):
            batch = [examples[i] for i in order[lo : lo + cfg.batch_size]]
            token_ids, tags, mask = _batch(model, batch)
            optimizer.zero_grad()
            loss = model.loss(token_ids, tags, mask)
            if not torch.isfinite(loss):
                norms = {n: float(p.detach().norm()) for n, p in model.named_parameters()}
                worst = max(norms, key=lambda n: norms[n] if np.isfinite(norms[n]) else np.inf)
                raise TrainingDiverged(
                    f"non-finite loss {loss.item()} at epoch {epoch}, batch {b}; "
                    f"largest parameter norm: {worst}={norms[worst]:.4g}"
                )
            loss.backward()
            optimizer.step()
            epoch_loss += loss.item() * len(batch)
        model.loss_history.append(epoch_loss / len(examples))
        logger.info("epoch %d/%d loss %.4f", epoch + 1, cfg.epochs, model.loss_history[-1])
    model.eval()
    model.dropout_gen = None
    return model
