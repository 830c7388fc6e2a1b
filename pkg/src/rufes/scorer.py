"""Mention-detection, CEAF-family and typing metrics plus error categorization.

Counts are accumulated as integers (or exact fractions for entity CEAF) before
the final division, so per-document reduction order never changes a score.
"""

from __future__ import annotations

import logging
import math
from collections import defaultdict
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Hashable, Iterable, Sequence

import numpy as np

from .corpus import Mention, mention_sort_key

logger = logging.getLogger(__name__)

FINE_GRAIN_TYPING = "fine_grain_typing_approx"
METRICS = (
    "strong_mention_match",
    "strong_typed_mention_match",
    "mention_ceaf",
    "typed_mention_ceaf",
    "entity_ceaf",
    FINE_GRAIN_TYPING,
)


class ScorerInputError(ValueError):
    pass


@dataclass(frozen=True)
class PRF:
    precision: float
    recall: float
    f1: float

    @classmethod
    def from_counts(cls, matched_sys, n_sys, matched_gold=None, n_gold=None) -> PRF:
        """Build from (possibly fractional) numerators and integer denominators."""
        if matched_gold is None:
            matched_gold = matched_sys
        p = Fraction(matched_sys) / n_sys if n_sys else Fraction(0)
        r = Fraction(matched_gold) / n_gold if n_gold else Fraction(0)
        f = 2 * p * r / (p + r) if p + r else Fraction(0)
        return cls(float(p), float(r), float(f))


# --------------------------------------------------------------------------- mention match

def _dedup(mentions: Iterable[Mention], key: Callable[[Mention], Hashable], side: str) -> dict:
    out: dict = {}
    for m in mentions:
        k = key(m)
        if k in out:
            logger.warning("duplicate %s mention %s dropped", side, k)
            continue
        out[k] = m
    return out


def _span(m: Mention) -> tuple:
    return m.span


def _typed(m: Mention) -> tuple:
    return (*m.span, m.type_path)


def strong_mention_match(gold: Sequence[Mention], sys: Sequence[Mention]) -> PRF:
    g, s = _dedup(gold, _span, "gold"), _dedup(sys, _span, "system")
    tp = len(g.keys() & s.keys())
    return PRF.from_counts(tp, len(s), tp, len(g))


def strong_typed_mention_match(gold: Sequence[Mention], sys: Sequence[Mention]) -> PRF:
    g, s = _dedup(gold, _typed, "gold"), _dedup(sys, _typed, "system")
    tp = len(g.keys() & s.keys())
    return PRF.from_counts(tp, len(s), tp, len(g))


# --------------------------------------------------------------------------- assignment

@dataclass(frozen=True)
class Alignment:
    pairs: tuple[tuple[int, int], ...]
    total: float


def _hungarian_min(cost: np.ndarray) -> list[int]:
    """Square min-cost assignment via shortest augmenting paths with potentials.

    Returns ``col_of_row``.
    """
    n = cost.shape[0]
    u = np.zeros(n + 1)
    v = np.zeros(n + 1)
    row_of_col = np.zeros(n + 1, dtype=np.int64)  # 1-based rows, 0 = free
    way = np.zeros(n + 1, dtype=np.int64)
    for i in range(1, n + 1):
        row_of_col[0] = i
        j0 = 0
        min_slack = np.full(n + 1, np.inf)
        used = np.zeros(n + 1, dtype=bool)
        while True:
            used[j0] = True
            i0 = row_of_col[j0]
            free = ~used[1:]
            slack = cost[i0 - 1] - u[i0] - v[1:]
            better = free & (slack < min_slack[1:])
            min_slack[1:][better] = slack[better]
            way[1:][better] = j0
            cand = np.where(free, min_slack[1:], np.inf)
            j1 = int(np.argmin(cand)) + 1
            delta = cand[j1 - 1]
            u[row_of_col[used]] += delta
            v[used] -= delta
            min_slack[~used] -= delta
            j0 = j1
            if row_of_col[j0] == 0:
                break
        while j0:
            j1 = way[j0]
            row_of_col[j0] = row_of_col[j1]
            j0 = j1
    col_of_row = [0] * n
    for j in range(1, n + 1):
        col_of_row[row_of_col[j] - 1] = j - 1
    return col_of_row


def optimal_alignment(matrix, maximize: bool = True) -> Alignment:
    """One-to-one assignment of rows to columns optimizing the summed entries.

    Rectangular inputs are padded with zero-valued dummy rows/columns; pairs
    involving a dummy are dropped from the result.
    """
    matrix = np.asarray(matrix, dtype=np.float64)
    if matrix.ndim != 2:
        raise ValueError("alignment matrix must be 2-D")
    rows, cols = matrix.shape
    if rows == 0 or cols == 0:
        return Alignment((), 0.0)
    if not np.all(np.isfinite(matrix)):
        raise ValueError("alignment matrix must be finite")
    n = max(rows, cols)
    padded = np.zeros((n, n))
    padded[:rows, :cols] = matrix
    cost = padded.max() - padded if maximize else padded - padded.min()
    col_of_row = _hungarian_min(cost)
    pairs = tuple((i, j) for i, j in enumerate(col_of_row) if i < rows and j < cols)
    return Alignment(pairs, math.fsum(matrix[i, j] for i, j in pairs))


# --------------------------------------------------------------------------- CEAF

def clusters_from_mentions(mentions: Iterable[Mention], key: Callable[[Mention], Hashable],
                           side: str = "input") -> dict[str, list[frozenset]]:
    """Group mention keys into clusters per document by entity id.

    Mentions without an entity id are singletons. A key that ends up in two
    different clusters is an input error.
    """
    by_entity: dict[tuple, set] = defaultdict(set)
    owner: dict[Hashable, tuple] = {}
    for n, m in enumerate(sorted(mentions, key=mention_sort_key)):
        cluster_id = (m.doc_id, m.entity_id if m.entity_id is not None else f"\0singleton{n}")
        k = key(m)
        if k in owner and owner[k] != cluster_id:
            raise ScorerInputError(f"{side} mention {k} belongs to clusters {owner[k][1]!r} and {cluster_id[1]!r}")
        owner[k] = cluster_id
        by_entity[cluster_id].add(k)
    docs: dict[str, list[frozenset]] = defaultdict(list)
    for (doc_id, _), keys in sorted(by_entity.items(), key=lambda kv: (kv[0][0], min(map(str, kv[1])))):
        docs[doc_id].append(frozenset(keys))
    return docs


def _phi_mention(a: frozenset, b: frozenset) -> Fraction:
    return Fraction(len(a & b))


def _phi_entity(a: frozenset, b: frozenset) -> Fraction:
    return Fraction(2 * len(a & b), len(a) + len(b))


def ceaf_clusters(gold: dict[str, list[frozenset]], sys: dict[str, list[frozenset]], phi: str) -> PRF:
    """CEAF over per-document cluster lists. ``phi`` is ``"mention"`` or ``"entity"``."""
    if phi == "mention":
        sim, self_sim = _phi_mention, lambda clusters: sum(len(c) for c in clusters)
    elif phi == "entity":
        sim, self_sim = _phi_entity, len
    else:
        raise ValueError(f"unknown phi {phi!r}")
    matched = Fraction(0)
    gold_norm = sys_norm = 0
    for doc_id in sorted(gold.keys() | sys.keys()):
        g, s = gold.get(doc_id, []), sys.get(doc_id, [])
        gold_norm += self_sim(g)
        sys_norm += self_sim(s)
        if not g or not s:
            continue
        exact = [[sim(a, b) for b in s] for a in g]
        alignment = optimal_alignment([[float(x) for x in row] for row in exact])
        matched += sum((exact[i][j] for i, j in alignment.pairs), Fraction(0))
    return PRF.from_counts(matched, sys_norm, matched, gold_norm)


def ceaf(gold: Sequence[Mention], sys: Sequence[Mention], kind: str) -> PRF:
    """``kind``: ``mention_ceaf``, ``typed_mention_ceaf`` or ``entity_ceaf``."""
    key = _typed if kind == "typed_mention_ceaf" else _span
    phi = {"mention_ceaf": "mention", "typed_mention_ceaf": "mention", "entity_ceaf": "entity"}.get(kind)
    if phi is None:
        raise ValueError(f"unknown CEAF variant {kind!r}")
    return ceaf_clusters(clusters_from_mentions(gold, key, "gold"),
                         clusters_from_mentions(sys, key, "system"), phi)


# --------------------------------------------------------------------------- typing

PARTIAL_CREDIT = Fraction(1, 2)


def fine_grain_typing(gold: Sequence[Mention], sys: Sequence[Mention], partial_credit: bool = False) -> PRF:
    """Approximate fine-grained typing F: full credit for an exact type path on
    an exact span, optionally half credit when the system path is a strict
    ancestor of the gold path.
    """
    g, s = _dedup(gold, _span, "gold"), _dedup(sys, _span, "system")
    credit = Fraction(0)
    for span, sm in s.items():
        gm = g.get(span)
        if gm is None:
            continue
        if sm.type_path == gm.type_path:
            credit += 1
        elif partial_credit and sm.type_path.is_strict_ancestor_of(gm.type_path):
            credit += PARTIAL_CREDIT
    return PRF.from_counts(credit, len(s), credit, len(g))


def score_all(gold: Sequence[Mention], sys: Sequence[Mention], partial_credit: bool = False) -> dict[str, PRF]:
    return {
        "strong_mention_match": strong_mention_match(gold, sys),
        "strong_typed_mention_match": strong_typed_mention_match(gold, sys),
        "mention_ceaf": ceaf(gold, sys, "mention_ceaf"),
        "typed_mention_ceaf": ceaf(gold, sys, "typed_mention_ceaf"),
        "entity_ceaf": ceaf(gold, sys, "entity_ceaf"),
        FINE_GRAIN_TYPING: fine_grain_typing(gold, sys, partial_credit),
    }


def format_report(scores: dict[str, PRF]) -> str:
    """Machine-readable: one ``name<TAB>P<TAB>R<TAB>F`` line per metric."""
    return "".join(f"{name}\t{s.precision:.6f}\t{s.recall:.6f}\t{s.f1:.6f}\n" for name, s in scores.items())


def format_table(scores: dict[str, PRF]) -> str:
    width = max(len(name) for name in scores)
    lines = [f"{'metric':<{width}}  {'P':>8}  {'R':>8}  {'F':>8}"]
    lines += [f"{name:<{width}}  {s.precision:8.4f}  {s.recall:8.4f}  {s.f1:8.4f}" for name, s in scores.items()]
    if FINE_GRAIN_TYPING in scores:
        lines.append(f"({FINE_GRAIN_TYPING} is an approximation of the official typing score)")
    return "\n".join(lines) + "\n"


# --------------------------------------------------------------------------- errors

ERROR_CATEGORIES = ("wrong_type", "extraneous", "wrong_extent", "missing", "coref_error")


@dataclass(frozen=True)
class ErrorItem:
    category: str
    doc_id: str
    start: int
    end: int
    detail: str


@dataclass
class ErrorReport:
    counts: dict[str, int] = field(default_factory=lambda: dict.fromkeys(ERROR_CATEGORIES, 0))
    items: list[ErrorItem] = field(default_factory=list)

    def add(self, category: str, m: Mention, detail: str) -> None:
        self.counts[category] += 1
        self.items.append(ErrorItem(category, m.doc_id, m.start, m.end, detail))

    @property
    def total(self) -> int:
        return sum(self.counts.values())

    def as_tuple(self) -> tuple[int, ...]:
        return tuple(self.counts[c] for c in ERROR_CATEGORIES)

    def format(self) -> str:
        total = self.total
        lines = [f"{'category':<14} {'count':>6} {'share':>7}"]
        for c in ERROR_CATEGORIES:
            share = self.counts[c] / total if total else 0.0
            lines.append(f"{c:<14} {self.counts[c]:>6} {share:>7.1%}")
        lines.append("")
        lines += [f"{it.category}\t{it.doc_id}:{it.start}-{it.end}\t{it.detail}" for it in self.items]
        return "\n".join(lines) + "\n"


def categorize_errors(gold: Sequence[Mention], sys: Sequence[Mention]) -> ErrorReport:
    """Assign each erroneous mention to one category.

    System mentions: exact span with a different type is ``wrong_type``; an
    overlapping but different span is ``wrong_extent``; no overlap at all is
    ``extraneous``. Gold mentions overlapped by no system mention are
    ``missing``. Exact-span matches whose set of earlier coreferent matches
    differs between system and gold are ``coref_error``.
    """
    report = ErrorReport()
    g_by_doc: dict[str, dict] = defaultdict(dict)
    s_by_doc: dict[str, dict] = defaultdict(dict)
    for span, m in _dedup(gold, _span, "gold").items():
        g_by_doc[m.doc_id][span] = m
    for span, m in _dedup(sys, _span, "system").items():
        s_by_doc[m.doc_id][span] = m

    for doc_id in sorted(g_by_doc.keys() | s_by_doc.keys()):
        g, s = g_by_doc.get(doc_id, {}), s_by_doc.get(doc_id, {})
        for span in sorted(s, key=lambda k: k[1:]):
            sm = s[span]
            gm = g.get(span)
            if gm is not None:
                if gm.type_path != sm.type_path:
                    report.add("wrong_type", sm, f"{sm.type_path} vs gold {gm.type_path}")
                continue
            overlapping = [x for x in g.values() if x.overlaps(sm)]
            if overlapping:
                report.add("wrong_extent", sm, "gold extent " + ", ".join(
                    f"{x.start}-{x.end}" for x in sorted(overlapping, key=mention_sort_key)))
            else:
                report.add("extraneous", sm, repr(sm.text))
        for span in sorted(g, key=lambda k: k[1:]):
            gm = g[span]
            if span not in s and not any(x.overlaps(gm) for x in s.values()):
                report.add("missing", gm, repr(gm.text))

        matched = sorted(g.keys() & s.keys(), key=lambda k: k[1:])
        gold_ent = [g[k].entity_id if g[k].entity_id is not None else ("\0", k) for k in matched]
        sys_ent = [s[k].entity_id if s[k].entity_id is not None else ("\0", k) for k in matched]
        for k in range(len(matched)):
            earlier_gold = {j for j in range(k) if gold_ent[j] == gold_ent[k]}
            earlier_sys = {j for j in range(k) if sys_ent[j] == sys_ent[k]}
            if earlier_gold != earlier_sys:
                m = s[matched[k]]
                report.add("coref_error", m, f"linked to {sorted(earlier_sys)} but gold links {sorted(earlier_gold)}")
    return report

