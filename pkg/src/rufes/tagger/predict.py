from __future__ import annotations

from dataclasses import replace
from typing import Sequence

import numpy as np
import torch

from ..corpus import Document, Mention, TagTracks, from_iob
from ..ontology import TypeHierarchy, correct_type
from .crf import crf_marginals, viterbi_decode
from .model import TaggerModel
from .train import windows
from .vocab import Vocab

# Marginals can underflow to 0; submissions need confidence in (0, 1].
MIN_CONFIDENCE = 1e-12


def tag_sequence(model: TaggerModel, token_ids: Sequence[int]) -> tuple[list[list[str]], list[float]]:
    """Viterbi labels per task and per-token confidence for one token sequence.

    Long sequences are decoded in independent windows of ``max_seq_len``.
    A token's confidence is the smallest posterior marginal of its decoded
    label across tasks.
    """
    labels: list[list[str]] = [[] for _ in model.heads]
    confidence: list[float] = []
    for lo, hi in windows(len(token_ids), model.config.max_seq_len):
        ids = torch.as_tensor(list(token_ids[lo:hi]), dtype=torch.long)[None]
        with torch.no_grad():
            emissions = [e[0].numpy() for e in model.emissions(ids)]
        window_conf = np.ones(hi - lo)
        for t, (head, em) in enumerate(zip(model.heads, emissions)):
            trans, start, end = head.numpy_params()
            path, _ = viterbi_decode(em, trans, start, end)
            marg = crf_marginals(em, trans, start, end)
            labels[t].extend(model.label_sets[t][k] for k in path)
            window_conf = np.minimum(window_conf, marg[np.arange(len(path)), path])
        confidence.extend(float(max(c, MIN_CONFIDENCE)) for c in window_conf)
    return labels, confidence


def predict(model: TaggerModel, doc: Document, vocab: Vocab, h: TypeHierarchy | None = None) -> list[Mention]:
    """Tag every segment of ``doc`` and assemble mentions, type-corrected against ``h``."""
    seg_tracks, seg_conf = [], []
    for seg in doc.segments:
        if not seg.tokens:
            seg_tracks.append(tuple(() for _ in model.heads))
            seg_conf.append([])
            continue
        labels, conf = tag_sequence(model, vocab.encode(tok.text for tok in seg.tokens))
        seg_tracks.append(tuple(tuple(track) for track in labels))
        seg_conf.append(conf)
    mentions = from_iob(doc, TagTracks(tuple(seg_tracks)), seg_conf)
    if h is not None and len(h):
        mentions = [replace(m, type_path=correct_type(m.type_path, h)) for m in mentions]
    return mentions
