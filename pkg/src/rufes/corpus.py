"""LTF/RSD ingestion and conversion between mentions and multi-track IOB tags.

Offsets are character (code point) indices into the RSD text, end-inclusive,
following the LTF convention.
"""

from __future__ import annotations

import xml.etree.ElementTree as ET
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence
from xml.sax.saxutils import escape, quoteattr

from .ontology import TypePath

MENTION_CLASSES = ("NAM", "NOM", "PRO")
TRACK_NAMES = ("level1", "level2", "level3", "class")
OUTSIDE = "O"


class LTFParseError(ValueError):
    """Malformed XML. ``position`` is the byte offset of the error."""

    def __init__(self, message: str, position: int) -> None:
        super().__init__(f"{message} (byte {position})")
        self.position = position


class LTFSchemaError(ValueError):
    """Well-formed XML that does not follow the SEG/TOKEN layout."""


class AlignmentError(ValueError):
    def __init__(self, mentions: Sequence[Mention]) -> None:
        self.mentions = list(mentions)
        listing = ", ".join(f"{m.doc_id}:{m.start}-{m.end} {m.text!r}" for m in self.mentions)
        super().__init__(f"mentions not aligned to token boundaries: {listing}")


class OverlapError(ValueError):
    def __init__(self, pairs: Sequence[tuple[Mention, Mention]]) -> None:
        self.pairs = list(pairs)
        listing = "; ".join(f"{a.start}-{a.end} / {b.start}-{b.end}" for a, b in self.pairs)
        super().__init__(f"overlapping mentions cannot be IOB-encoded: {listing}")


@dataclass(frozen=True)
class Token:
    id: str
    text: str
    start: int
    end: int

    def __post_init__(self) -> None:
        if self.end < self.start:
            raise LTFSchemaError(f"token {self.id}: end {self.end} < start {self.start}")


@dataclass(frozen=True)
class Segment:
    id: str
    start: int
    end: int
    tokens: tuple[Token, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "tokens", tuple(self.tokens))
        prev_end = -1
        for tok in self.tokens:
            if tok.start < self.start or tok.end > self.end:
                raise LTFSchemaError(f"token {tok.id} lies outside segment {self.id}")
            if tok.start <= prev_end:
                raise LTFSchemaError(f"token {tok.id} overlaps or precedes its predecessor")
            prev_end = tok.end


@dataclass(frozen=True)
class Document:
    doc_id: str
    segments: tuple[Segment, ...] = ()
    rsd_len: int = 0
    rsd_text: str | None = field(default=None, compare=False, repr=False)

    def __post_init__(self) -> None:
        if not self.doc_id:
            raise LTFSchemaError("doc_id must be non-empty")
        object.__setattr__(self, "segments", tuple(self.segments))
        for seg in self.segments:
            if seg.end >= self.rsd_len:
                raise LTFSchemaError(f"segment {seg.id} ends at {seg.end}, beyond rsd_len {self.rsd_len}")

    @property
    def tokens(self) -> list[Token]:
        return [tok for seg in self.segments for tok in seg.tokens]

    def text_span(self, start: int, end: int) -> str:
        """Source text for ``[start, end]``; rebuilt from tokens when no RSD is attached."""
        if self.rsd_text is not None:
            return self.rsd_text[start : end + 1]
        chars = [" "] * (end - start + 1)
        for tok in self.tokens:
            if tok.end < start or tok.start > end:
                continue
            for i, ch in enumerate(tok.text):
                pos = tok.start + i
                if start <= pos <= end:
                    chars[pos - start] = ch
        return "".join(chars)

    def with_rsd(self, rsd_text: str) -> Document:
        return replace(self, rsd_len=len(rsd_text), rsd_text=rsd_text)


@dataclass(frozen=True)
class Mention:
    doc_id: str
    start: int
    end: int
    text: str
    type_path: TypePath
    mention_class: str = "NAM"
    confidence: float = 1.0
    entity_id: str | None = None

    def __post_init__(self) -> None:
        if self.end < self.start:
            raise ValueError(f"mention end {self.end} < start {self.start}")
        if self.mention_class not in MENTION_CLASSES:
            raise ValueError(f"unknown mention class {self.mention_class!r}")
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError(f"confidence {self.confidence} outside [0, 1]")

    @property
    def span(self) -> tuple[str, int, int]:
        return (self.doc_id, self.start, self.end)

    def overlaps(self, other: Mention) -> bool:
        return self.doc_id == other.doc_id and self.start <= other.end and other.start <= self.end


def mention_sort_key(m: Mention) -> tuple:
    return (m.doc_id, m.start, m.end, str(m.type_path))


# Per segment: one label sequence per track, each as long as the segment.
SegmentTracks = tuple[tuple[str, ...], ...]


@dataclass(frozen=True)
class TagTracks:
    segments: tuple[SegmentTracks, ...]

    def __post_init__(self) -> None:
        object.__setattr__(
            self, "segments",
            tuple(tuple(tuple(track) for track in seg) for seg in self.segments),
        )
        for seg in self.segments:
            if len(seg) != len(TRACK_NAMES):
                raise ValueError(f"expected {len(TRACK_NAMES)} tracks per segment, got {len(seg)}")
            if len({len(track) for track in seg}) > 1:
                raise ValueError("tracks within a segment differ in length")


def split_label(label: str) -> tuple[str, str | None]:
    """``"B-PER"`` -> ``("B", "PER")``; ``"O"`` -> ``("O", None)``."""
    if label == OUTSIDE:
        return OUTSIDE, None
    prefix, sep, name = label.partition("-")
    if not sep or prefix not in ("B", "I") or not name:
        raise ValueError(f"bad IOB label {label!r}")
    return prefix, name


def is_well_formed(labels: Sequence[str]) -> bool:
    prev = None
    for label in labels:
        prefix, name = split_label(label)
        if prefix == "I" and prev != name:
            return False
        prev = name
    return True


# --------------------------------------------------------------------------- LTF

def _byte_offset(data: bytes, line: int, column: int) -> int:
    lines = data.split(b"\n")
    return sum(len(chunk) + 1 for chunk in lines[: line - 1]) + column


def _int_attr(elem: ET.Element, name: str) -> int:
    value = elem.get(name)
    if value is None:
        raise LTFSchemaError(f"{elem.tag} {elem.get('id', '?')!r} is missing attribute {name}")
    try:
        return int(value)
    except ValueError:
        raise LTFSchemaError(f"{elem.tag} {elem.get('id', '?')!r}: {name}={value!r} is not an integer") from None


def parse_ltf(xml_bytes: bytes, doc_id: str | None = None, rsd_len: int | None = None) -> Document:
    """Parse an LTF file. ``rsd_len`` defaults to one past the last offset."""
    try:
        root = ET.fromstring(xml_bytes)
    except ET.ParseError as exc:
        line, column = exc.position
        raise LTFParseError(f"malformed LTF XML: {exc}", _byte_offset(xml_bytes, line, column)) from None

    doc_elem = root if root.tag == "DOC" else root.find(".//DOC")
    if doc_id is None:
        doc_id = doc_elem.get("id") if doc_elem is not None else None
    if not doc_id:
        raise LTFSchemaError("no document id in DOC element and none supplied")

    segments = []
    for seg_elem in root.iter("SEG"):
        seg_id = seg_elem.get("id")
        if seg_id is None:
            raise LTFSchemaError("SEG element without id")
        tokens = []
        for tok_elem in seg_elem.iter("TOKEN"):
            tok_id = tok_elem.get("id")
            if tok_id is None:
                raise LTFSchemaError(f"TOKEN without id in SEG {seg_id!r}")
            tokens.append(Token(tok_id, tok_elem.text or "", _int_attr(tok_elem, "start_char"),
                                _int_attr(tok_elem, "end_char")))
        segments.append(Segment(seg_id, _int_attr(seg_elem, "start_char"), _int_attr(seg_elem, "end_char"),
                                tuple(tokens)))
    if rsd_len is None:
        rsd_len = max((seg.end for seg in segments), default=-1) + 1
    return Document(doc_id, tuple(segments), rsd_len)


def serialize_ltf(doc: Document) -> bytes:
    lines = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        "<LCTL_TEXT>",
        f"<DOC id={quoteattr(doc.doc_id)}>",
        "<TEXT>",
    ]
    for seg in doc.segments:
        lines.append(f'<SEG id={quoteattr(seg.id)} start_char="{seg.start}" end_char="{seg.end}">')
        if doc.rsd_text is not None:
            lines.append(f"<ORIGINAL_TEXT>{escape(doc.rsd_text[seg.start : seg.end + 1])}</ORIGINAL_TEXT>")
        for tok in seg.tokens:
            lines.append(
                f'<TOKEN id={quoteattr(tok.id)} start_char="{tok.start}" end_char="{tok.end}">'
                f"{escape(tok.text)}</TOKEN>"
            )
        lines.append("</SEG>")
    lines += ["</TEXT>", "</DOC>", "</LCTL_TEXT>", ""]
    return "\n".join(lines).encode("utf-8")


@dataclass(frozen=True)
class Mismatch:
    segment_id: str
    token_id: str
    token_text: str
    rsd_text: str


@dataclass
class ValidationReport:
    doc_id: str
    mismatches: list[Mismatch] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.mismatches)

    @property
    def ok(self) -> bool:
        return not self.mismatches


def validate_against_rsd(doc: Document, rsd_text: str) -> ValidationReport:
    report = ValidationReport(doc.doc_id)
    for seg in doc.segments:
        for tok in seg.tokens:
            found = rsd_text[tok.start : tok.end + 1]
            if found != tok.text:
                report.mismatches.append(Mismatch(seg.id, tok.id, tok.text, found))
    return report


# --------------------------------------------------------------------------- IOB

def resolve_overlaps(mentions: Iterable[Mention]) -> list[Mention]:
    """Keep the longest of each group of overlapping mentions (earliest start on ties)."""
    kept: list[Mention] = []
    for m in sorted(mentions, key=lambda m: (-(m.end - m.start), m.start, str(m.type_path))):
        if not any(m.overlaps(k) for k in kept):
            kept.append(m)
    return sorted(kept, key=mention_sort_key)


def snap_to_tokens(doc: Document, mention: Mention) -> Mention:
    """Widen ``mention`` to the tokens it touches; unchanged if it touches none."""
    for seg in doc.segments:
        touched = [t for t in seg.tokens if t.start <= mention.end and mention.start <= t.end]
        if touched:
            start, end = touched[0].start, touched[-1].end
            return replace(mention, start=start, end=end, text=doc.text_span(start, end))
    return mention


def _locate(doc: Document, m: Mention) -> tuple[int, int, int] | None:
    for s, seg in enumerate(doc.segments):
        starts = {tok.start: i for i, tok in enumerate(seg.tokens)}
        ends = {tok.end: i for i, tok in enumerate(seg.tokens)}
        if m.start in starts and m.end in ends and starts[m.start] <= ends[m.end]:
            return s, starts[m.start], ends[m.end]
    return None


def to_iob(doc: Document, mentions: Iterable[Mention], *, keep_longest: bool = False,
           snap: bool = False) -> TagTracks:
    """Encode mentions of ``doc`` as four parallel IOB tracks per segment.

    Mentions belonging to other documents are ignored.
    """
    mentions = [m for m in mentions if m.doc_id == doc.doc_id]
    if snap:
        mentions = [snap_to_tokens(doc, m) for m in mentions]
    if keep_longest:
        mentions = resolve_overlaps(mentions)
    else:
        ordered = sorted(mentions, key=mention_sort_key)
        clashes = [(a, b) for i, a in enumerate(ordered) for b in ordered[i + 1 :] if a.overlaps(b)]
        if clashes:
            raise OverlapError(clashes)

    located = [(m, _locate(doc, m)) for m in mentions]
    unaligned = [m for m, loc in located if loc is None]
    if unaligned:
        raise AlignmentError(unaligned)

    tracks = [[[OUTSIDE] * len(seg.tokens) for _ in TRACK_NAMES] for seg in doc.segments]
    for m, (s, first, last) in located:
        names = list(m.type_path.levels) + [None] * (3 - len(m.type_path))
        names.append(m.mention_class)
        for t, name in enumerate(names):
            if name is None:
                continue
            tracks[s][t][first] = f"B-{name}"
            for i in range(first + 1, last + 1):
                tracks[s][t][i] = f"I-{name}"
    return TagTracks(tuple(tuple(tuple(tr) for tr in seg) for seg in tracks))


def _name_at(label: str) -> str | None:
    return split_label(label)[1]


def from_iob(doc: Document, tracks: TagTracks,
             confidences: Sequence[Sequence[float]] | None = None) -> list[Mention]:
    """Decode mentions from IOB tracks.

    Spans come from maximal B/I runs on the level-1 track; a stray ``I-x``
    (after ``O`` or a different type) opens a new span. Deeper type levels and
    the mention class are read at the first token of the span. Confidence is
    the minimum per-token confidence over the span.
    """
    if len(tracks.segments) != len(doc.segments):
        raise ValueError(f"{len(tracks.segments)} track segments for {len(doc.segments)} document segments")
    mentions = []
    for s, (seg, seg_tracks) in enumerate(zip(doc.segments, tracks.segments)):
        level1 = seg_tracks[0]
        if len(level1) != len(seg.tokens):
            raise ValueError(f"segment {seg.id}: {len(level1)} labels for {len(seg.tokens)} tokens")
        runs: list[list[int]] = []
        prev = None
        for i, label in enumerate(level1):
            prefix, name = split_label(label)
            if name is None:
                prev = None
                continue
            if prefix == "B" or name != prev:
                runs.append([i, i])
            else:
                runs[-1][1] = i
            prev = name

        for first, last in runs:
            levels = [_name_at(level1[first])]
            for t in (1, 2):
                name = _name_at(seg_tracks[t][first])
                if name is None:
                    break
                levels.append(name)
            mclass = _name_at(seg_tracks[3][first])
            if mclass not in MENTION_CLASSES:
                mclass = "NAM"
            conf = 1.0 if confidences is None else float(min(confidences[s][first : last + 1]))
            start, end = seg.tokens[first].start, seg.tokens[last].end
            mentions.append(Mention(doc.doc_id, start, end, doc.text_span(start, end),
                                    TypePath(tuple(levels)), mclass, conf))
    return mentions


def write_iob(doc: Document, tracks: TagTracks) -> str:
    """Seven TAB-separated columns per token, blank line between segments."""
    blocks = []
    for seg, seg_tracks in zip(doc.segments, tracks.segments):
        rows = [
            "\t".join([tok.text, str(tok.start), str(tok.end), *(track[i] for track in seg_tracks)])
            for i, tok in enumerate(seg.tokens)
        ]
        blocks.append("\n".join(rows) + "\n")
    return "\n".join(blocks)


def read_iob(text: str) -> list[list[tuple[str, int, int, tuple[str, ...]]]]:
    """Inverse of :func:`write_iob`: per segment, ``(token, start, end, labels)`` rows."""
    segments: list[list] = []
    current: list = []
    for line in text.split("\n"):
        if not line:
            if current:
                segments.append(current)
                current = []
            continue
        cols = line.split("\t")
        if len(cols) != 3 + len(TRACK_NAMES):
            raise ValueError(f"expected {3 + len(TRACK_NAMES)} columns, got {len(cols)}: {line!r}")
        current.append((cols[0], int(cols[1]), int(cols[2]), tuple(cols[3:])))
    if current:
        segments.append(current)
    return segments
