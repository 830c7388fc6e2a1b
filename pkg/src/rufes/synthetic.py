"""Seeded generator of small LTF/RSD corpora with gold mentions.

Every type owns a name prefix (``Pho...`` names are always photographers)
and a nominal head noun, so the type of a mention is fully determined by its
tokens. Used by the test-suite and for end-to-end demos.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .corpus import Document, Mention, Segment, Token, serialize_ltf
from .ontology import TypePath

SYNTHETIC_ONTOLOGY = """\
# synthetic three-level ontology
PER.Artist.Photographer
PER.Artist.Painter
PER.Politician.Governor
ORG.CommercialOrganization.Airline
ORG.Association.Club
GPE.ProvinceState
GPE.City.Capital
FAC.Building.Hospital
FAC.Building.Airport
FAC.Way.Highway
Pathogen.Virus
LOC.Land.Island
"""

# type -> (name prefix, nominal head)
TYPE_CUES: dict[str, tuple[str, str]] = {
    "PER.Artist.Photographer": ("Pho", "photographer"),
    "PER.Artist.Painter": ("Pai", "painter"),
    "PER.Politician.Governor": ("Gov", "governor"),
    "ORG.CommercialOrganization.Airline": ("Air", "airline"),
    "ORG.Association.Club": ("Clu", "club"),
    "GPE.City.Capital": ("Cap", "capital"),
    "FAC.Building.Hospital": ("Hos", "hospital"),
    "FAC.Building.Airport": ("Apo", "airport"),
    "FAC.Way.Highway": ("Hwy", "highway"),
    "LOC.Land.Island": ("Isl", "island"),
}

SUFFIXES = ("an", "bel", "cor", "dun", "eth", "fir", "gal", "hom", "ix", "jen", "kol", "lur")

FILLER = (
    "said", "on", "Tuesday", "that", "in", "the", "report", "was", "with", "after", "visited",
    "announced", "near", "during", "week", "from", "and", "new", "plan", "by", "about", "met",
    "officials", "spoke", "of", "a", "year", "last", "for", "to", "called", "later",
)


@dataclass
class SyntheticDocument:
    doc: Document
    mentions: list[Mention]

    @property
    def rsd_text(self) -> str:
        return self.doc.rsd_text or ""


def _build(doc_id: str, sentences: list[list[tuple[str, object]]]) -> SyntheticDocument:
    """``sentences`` hold (token, mention-marker) pairs; markers group tokens into mentions."""
    text_parts: list[str] = []
    pos = 0
    segments = []
    spans: dict[object, list[int]] = {}
    for s, sent in enumerate(sentences):
        if s:
            text_parts.append("\n\n")
            pos += 2
        seg_start = pos
        tokens = []
        for i, (word, marker) in enumerate(sent):
            if i:
                text_parts.append(" ")
                pos += 1
            tokens.append(Token(f"token-{s}-{i}", word, pos, pos + len(word) - 1))
            if marker is not None:
                span = spans.setdefault(marker, [pos, pos])
                span[1] = pos + len(word) - 1
            text_parts.append(word)
            pos += len(word)
        segments.append(Segment(f"segment-{s}", seg_start, max(pos - 1, seg_start), tuple(tokens)))
    text = "".join(text_parts) + "\n"
    doc = Document(doc_id, tuple(segments), len(text), text)
    mentions = []
    for marker, (start, end) in spans.items():
        type_path, mclass, entity_id = marker[1:]
        mentions.append(Mention(doc_id, start, end, text[start : end + 1], type_path, mclass, 1.0, entity_id))
    mentions.sort(key=lambda m: m.start)
    return SyntheticDocument(doc, mentions)


def generate_document(doc_id: str, n_sentences: int, rng: np.random.Generator,
                      nominal_rate: float = 0.25) -> SyntheticDocument:
    types = sorted(TYPE_CUES)
    entities: list[tuple[str, tuple[str, ...]]] = []  # (type, name tokens)
    sentences = []
    mention_no = 0
    for _ in range(n_sentences):
        sent: list[tuple[str, object]] = []

        def filler(lo: int, hi: int) -> None:
            for _ in range(rng.integers(lo, hi + 1)):
                sent.append((FILLER[rng.integers(len(FILLER))], None))

        filler(1, 3)
        for k in range(int(rng.integers(1, 4))):
            if k:
                filler(1, 3)
            if entities and rng.random() < 0.35:
                e = int(rng.integers(len(entities)))
            else:
                type_name = types[rng.integers(len(types))]
                prefix = TYPE_CUES[type_name][0]
                name = tuple(prefix + SUFFIXES[rng.integers(len(SUFFIXES))]
                             for _ in range(rng.integers(1, 3)))
                entities.append((type_name, name))
                e = len(entities) - 1
            type_name, name = entities[e]
            marker_base = (mention_no, TypePath.parse(type_name))
            mention_no += 1
            if rng.random() < nominal_rate:
                sent.append(("the", None))
                sent.append((TYPE_CUES[type_name][1], (*marker_base, "NOM", f"{doc_id}_E{e}")))
            else:
                for word in name:
                    sent.append((word, (*marker_base, "NAM", f"{doc_id}_E{e}")))
        filler(0, 2)
        sent.append((".", None))
        sentences.append(sent)
    return _build(doc_id, sentences)


def generate_corpus(n_docs: int, sentences_per_doc: int, seed: int = 0,
                    prefix: str = "SYN") -> list[SyntheticDocument]:
    rng = np.random.default_rng(seed)
    return [generate_document(f"{prefix}{i:04d}", sentences_per_doc, rng) for i in range(n_docs)]


def write_corpus(root: str | Path, docs: list[SyntheticDocument]) -> None:
    """Write ``ltf/<id>.ltf.xml`` and ``rsd/<id>.rsd.txt`` under ``root``."""
    root = Path(root)
    (root / "ltf").mkdir(parents=True, exist_ok=True)
    (root / "rsd").mkdir(parents=True, exist_ok=True)
    for sd in docs:
        (root / "ltf" / f"{sd.doc.doc_id}.ltf.xml").write_bytes(serialize_ltf(sd.doc))
        (root / "rsd" / f"{sd.doc.doc_id}.rsd.txt").write_text(sd.rsd_text, encoding="utf-8")
