"""Linear-chain CRF: forward algorithm, gold path scores, Viterbi, marginals.

A label sequence y over emissions E scores
``start[y0] + E[0, y0] + sum_t (trans[y(t-1), y(t)] + E[t, y(t)]) + end[y(T-1)]``.
Training-side functions are torch (differentiable, batched with a left-aligned
mask); decoding-side functions are numpy on a single sequence.
"""

from __future__ import annotations

import numpy as np
import torch
from scipy.special import logsumexp


def crf_log_partition(emissions: torch.Tensor, transitions: torch.Tensor, start: torch.Tensor,
                      end: torch.Tensor, mask: torch.Tensor | None = None) -> torch.Tensor:
    """Log of the summed exp-score over all label sequences.

    ``emissions`` is ``(T, K)`` or ``(B, T, K)``; the result is a scalar or ``(B,)``.
    """
    emissions = torch.as_tensor(emissions)
    single = emissions.dim() == 2
    if single:
        emissions = emissions[None]
        mask = None if mask is None else torch.as_tensor(mask)[None]
    transitions, start, end = (torch.as_tensor(t, dtype=emissions.dtype) for t in (transitions, start, end))
    length = emissions.shape[1]
    if length < 1:
        raise ValueError("CRF sequences must have length >= 1")

    alpha = start + emissions[:, 0]
    for t in range(1, length):
        step = torch.logsumexp(alpha[:, :, None] + transitions + emissions[:, t, None, :], dim=1)
        alpha = step if mask is None else torch.where(mask[:, t, None], step, alpha)
    log_z = torch.logsumexp(alpha + end, dim=1)
    return log_z[0] if single else log_z


def crf_path_score(emissions: torch.Tensor, tags: torch.Tensor, transitions: torch.Tensor,
                   start: torch.Tensor, end: torch.Tensor, mask: torch.Tensor | None = None) -> torch.Tensor:
    emissions = torch.as_tensor(emissions)
    tags = torch.as_tensor(tags, dtype=torch.long)
    single = emissions.dim() == 2
    if single:
        emissions, tags = emissions[None], tags[None]
        mask = None if mask is None else torch.as_tensor(mask)[None]
    if mask is None:
        mask = torch.ones(tags.shape, dtype=torch.bool)
    weights = mask.to(emissions.dtype)

    emit = emissions.gather(2, tags[:, :, None])[:, :, 0]
    score = start[tags[:, 0]] + emit[:, 0]
    score = score + ((transitions[tags[:, :-1], tags[:, 1:]] + emit[:, 1:]) * weights[:, 1:]).sum(dim=1)
    last = mask.long().sum(dim=1) - 1
    score = score + end[tags.gather(1, last[:, None])[:, 0]]
    return score[0] if single else score


def viterbi_decode(emissions, transitions, start, end) -> tuple[list[int], float]:
    """Best label sequence and its score. Ties go to the lowest label index."""
    emissions = np.asarray(emissions, dtype=np.float64)
    transitions = np.asarray(transitions, dtype=np.float64)
    length, num_labels = emissions.shape
    if length < 1:
        raise ValueError("CRF sequences must have length >= 1")

    score = np.asarray(start, dtype=np.float64) + emissions[0]
    backpointers = np.zeros((length, num_labels), dtype=np.int64)
    for t in range(1, length):
        cand = score[:, None] + transitions
        backpointers[t] = np.argmax(cand, axis=0)
        score = cand[backpointers[t], np.arange(num_labels)] + emissions[t]
    score = score + np.asarray(end, dtype=np.float64)
    best = int(np.argmax(score))
    path = [best]
    for t in range(length - 1, 0, -1):
        path.append(int(backpointers[t, path[-1]]))
    path.reverse()
    return path, float(score[best])


def crf_marginals(emissions, transitions, start, end) -> np.ndarray:
    """Per-position posterior label marginals via forward-backward, shape ``(T, K)``."""
    emissions = np.asarray(emissions, dtype=np.float64)
    transitions = np.asarray(transitions, dtype=np.float64)
    length, num_labels = emissions.shape
    alpha = np.empty((length, num_labels))
    beta = np.empty((length, num_labels))
    alpha[0] = np.asarray(start) + emissions[0]
    for t in range(1, length):
        alpha[t] = logsumexp(alpha[t - 1][:, None] + transitions, axis=0) + emissions[t]
    beta[-1] = np.asarray(end, dtype=np.float64)
    for t in range(length - 2, -1, -1):
        beta[t] = logsumexp(transitions + (emissions[t + 1] + beta[t + 1])[None, :], axis=1)
    log_z = logsumexp(alpha[-1] + beta[-1])
    return np.exp(alpha + beta - log_z)
