"""Small document builders shared by the tests."""

from __future__ import annotations

import itertools
import math

import numpy as np
import torch
from torch.func import functional_call, vmap

from rufes.corpus import Document, Mention, Segment, Token
from rufes.ontology import TypePath
from rufes.tagger import TaggerConfig, TaggerModel


def make_doc(doc_id: str, sentences: list[list[str]]) -> Document:
    """Space-joined tokens, segments separated by newlines."""
    text, segments, pos = [], [], 0
    for s, words in enumerate(sentences):
        if s:
            text.append("\n")
            pos += 1
        seg_start, tokens = pos, []
        for i, w in enumerate(words):
            if i:
                text.append(" ")
                pos += 1
            tokens.append(Token(f"t{s}-{i}", w, pos, pos + len(w) - 1))
            text.append(w)
            pos += len(w)
        segments.append(Segment(f"s{s}", seg_start, max(pos - 1, seg_start), tuple(tokens)))
    rsd = "".join(text) + "\n"
    return Document(doc_id, tuple(segments), len(rsd), rsd)


def mention(doc: Document, seg: int, first: int, last: int, path: str, mclass: str = "NAM",
            entity_id: str | None = None, confidence: float = 1.0) -> Mention:
    toks = doc.segments[seg].tokens
    start, end = toks[first].start, toks[last].end
    return Mention(doc.doc_id, start, end, doc.text_span(start, end), TypePath.parse(path), mclass,
                   confidence, entity_id)


LEVEL_NAMES = (("PER", "ORG", "GPE"), ("Artist", "Club", "City"), ("Photographer", "Capital", "Painter"))


def random_path(rng) -> TypePath:
    depth = int(rng.integers(1, 4))
    return TypePath(tuple(LEVEL_NAMES[d][rng.integers(3)] for d in range(depth)))


def random_layout(doc: Document, rng, max_mentions: int = 50, max_len: int = 3) -> list[Mention]:
    """Random non-overlapping, token-aligned mentions over ``doc``."""
    out = []
    for s, seg in enumerate(doc.segments):
        i, n = 0, len(seg.tokens)
        while i < n and len(out) < max_mentions:
            i += int(rng.integers(0, 3))
            if i >= n:
                break
            last = min(n - 1, i + int(rng.integers(0, max_len)))
            out.append(mention(doc, s, i, last, str(random_path(rng)),
                               ("NAM", "NOM", "PRO")[rng.integers(3)]))
            i = last + 1
    return out


def error_fixture() -> tuple[list[Mention], list[Mention]]:
    """One document with exactly one error of each category.

    gold A/PER/e1, B/ORG/e2, C/GPE/e3, D/PER/e4, F/PER/e1
    sys  A/PER/s1, B/GPE/s2 (wrong type), C' shorter than C (wrong extent),
         D absent (missing), F/PER/s4 not linked to A (coref error),
         X with no gold overlap (extraneous)
    """
    P = TypePath.parse
    g = [Mention("ERR", 0, 4, "Alpha", P("PER"), entity_id="e1"),
         Mention("ERR", 10, 14, "Bravo", P("ORG"), entity_id="e2"),
         Mention("ERR", 20, 29, "Charlie Co", P("GPE"), entity_id="e3"),
         Mention("ERR", 40, 44, "Delta", P("PER"), entity_id="e4"),
         Mention("ERR", 50, 54, "Alpha", P("PER"), entity_id="e1")]
    s = [Mention("ERR", 0, 4, "Alpha", P("PER"), entity_id="s1"),
         Mention("ERR", 10, 14, "Bravo", P("GPE"), entity_id="s2"),
         Mention("ERR", 20, 26, "Charlie", P("GPE"), entity_id="s3"),
         Mention("ERR", 50, 54, "Alpha", P("PER"), entity_id="s4"),
         Mention("ERR", 60, 64, "Xray!", P("ORG"), entity_id="s5")]
    return g, s


# --------------------------------------------------------------------------- oracles

def path_score(em, trans, start, end, path) -> float:
    # same summation order as a left-to-right dynamic program
    s = start[path[0]] + em[0, path[0]]
    for t in range(1, len(path)):
        s = s + trans[path[t - 1], path[t]] + em[t, path[t]]
    return s + end[path[-1]]


def enumerate_paths(length: int, k: int):
    return itertools.product(range(k), repeat=length)


def random_instance(rng, length=None, k=None):
    length = length or int(rng.integers(1, 6))
    k = k or int(rng.integers(1, 5))
    return (rng.normal(0, 2, (length, k)), rng.normal(0, 2, (k, k)), rng.normal(0, 1, k), rng.normal(0, 1, k))


def brute_force_total(mat: np.ndarray) -> float:
    rows, cols = mat.shape
    if rows == 0 or cols == 0:
        return 0.0
    if rows > cols:
        mat, rows, cols = mat.T, cols, rows
    return max(math.fsum(mat[i, j] for i, j in enumerate(perm))
               for perm in itertools.permutations(range(cols), rows))


def small_model(seed: int, **overrides) -> TaggerModel:
    rng = np.random.default_rng(seed)
    heads = int(rng.choice([1, 2]))
    cfg = TaggerConfig(vocab_size=8, hidden=4, num_layers=int(rng.integers(1, 3)), num_heads=heads, ffn_dims=6,
                       max_seq_len=6, seed=seed, **overrides)
    label_sets = [["O"] + [f"{p}-L{t}{i}" for i in range(int(rng.integers(1, 3))) for p in "BI"] for t in range(4)]
    model = TaggerModel.initialized(cfg, label_sets)
    with torch.no_grad():  # make every parameter non-trivial, including CRF scores
        gen = torch.Generator().manual_seed(seed)
        for p in model.parameters():
            p.add_(torch.randn(p.shape, generator=gen, dtype=torch.float64) * 0.3)
    return model


def _random_batch(model: TaggerModel, rng):
    lengths = rng.integers(1, model.config.max_seq_len + 1, 2)
    width = int(lengths.max())
    ids = torch.as_tensor(rng.integers(2, model.config.vocab_size, (2, width)))
    mask = torch.arange(width)[None, :] < torch.as_tensor(lengths)[:, None]
    tags = [torch.as_tensor(rng.integers(0, len(ls), (2, width))) for ls in model.label_sets]
    return ids, tags, mask


def gradient_relative_error(model: TaggerModel, rng, h: float = 1e-6) -> float:
    model.eval()
    ids, tags, mask = _random_batch(model, rng)
    model.zero_grad()
    model.loss(ids, tags, mask).backward()
    analytic = torch.cat([p.grad.reshape(-1) for p in model.parameters()])
    # Central differences, one coordinate at a time; all perturbations of a
    # tensor are evaluated in one vmapped call.
    base = {name: p.detach() for name, p in model.named_parameters()}
    numeric = []
    with torch.no_grad():
        for name, p in base.items():
            n = p.numel()
            step = (torch.eye(n, dtype=p.dtype) * h).reshape(n, *p.shape)
            loss_at = lambda value: functional_call(model, {**base, name: value}, (ids, tags, mask))
            losses = vmap(loss_at)(torch.cat([p + step, p - step]))
            numeric.append((losses[:n] - losses[n:]) / (2 * h))
    numeric = torch.cat(numeric)
    return float((analytic - numeric).norm() / max((analytic.norm() + numeric.norm()).item(), 1e-30))
