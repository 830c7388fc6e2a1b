"""TAC-style 8-column submission rows.

Columns: run_id, mention_id, mention text, provenance ``docid:start-end``,
entity_id, dotted type path, mention class, confidence. UTF-8, no header.
Tabs, newlines and backslashes inside the text column are backslash-escaped.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from .corpus import MENTION_CLASSES, Mention, mention_sort_key
from .ontology import TypePath

_PROVENANCE = re.compile(r"^(?P<doc>.+):(?P<start>\d+)-(?P<end>\d+)$")
_ESCAPES = {"\\": "\\\\", "\t": "\\t", "\n": "\\n", "\r": "\\r"}
_UNESCAPES = {"\\": "\\", "t": "\t", "n": "\n", "r": "\r"}


class SubmissionFormatError(ValueError):
    def __init__(self, message: str, line_no: int | None = None) -> None:
        self.line_no = line_no
        super().__init__(message if line_no is None else f"line {line_no}: {message}")


def _escape(text: str) -> str:
    return "".join(_ESCAPES.get(ch, ch) for ch in text)


def _unescape(text: str) -> str:
    return re.sub(r"\\(.)", lambda m: _UNESCAPES.get(m.group(1), m.group(1)), text)


@dataclass(frozen=True)
class SubmissionRow:
    run_id: str
    mention_id: str
    text: str
    doc_id: str
    start: int
    end: int
    entity_id: str
    type_path: TypePath
    mention_class: str
    confidence: float

    def __post_init__(self) -> None:
        if self.end < self.start or self.start < 0:
            raise SubmissionFormatError(f"bad offsets {self.start}-{self.end}")
        if self.mention_class not in MENTION_CLASSES:
            raise SubmissionFormatError(f"unknown mention class {self.mention_class!r}")
        if not 0.0 < self.confidence <= 1.0:
            raise SubmissionFormatError(f"confidence {self.confidence} outside (0, 1]")

    @property
    def provenance(self) -> str:
        return f"{self.doc_id}:{self.start}-{self.end}"

    def to_line(self) -> str:
        return "\t".join([
            self.run_id, self.mention_id, _escape(self.text), self.provenance, self.entity_id,
            str(self.type_path), self.mention_class, repr(float(self.confidence)),
        ])

    @classmethod
    def from_line(cls, line: str, line_no: int | None = None) -> SubmissionRow:
        cols = line.split("\t")
        if len(cols) != 8:
            raise SubmissionFormatError(f"expected 8 columns, got {len(cols)}", line_no)
        run_id, mention_id, text, prov, entity_id, type_path, mclass, conf = cols
        match = _PROVENANCE.match(prov)
        if not match:
            raise SubmissionFormatError(f"bad provenance {prov!r}", line_no)
        try:
            return cls(run_id, mention_id, _unescape(text), match["doc"], int(match["start"]),
                       int(match["end"]), entity_id, TypePath.parse(type_path), mclass, float(conf))
        except ValueError as exc:
            raise SubmissionFormatError(str(exc), line_no) from None

    def to_mention(self) -> Mention:
        return Mention(self.doc_id, self.start, self.end, self.text, self.type_path,
                       self.mention_class, self.confidence, self.entity_id)


def rows_from_mentions(mentions: Iterable[Mention], run_id: str) -> list[SubmissionRow]:
    """Rows ordered by doc then offset; singletons get a fresh per-document entity id."""
    rows = []
    fresh: dict[str, int] = {}
    for k, m in enumerate(sorted(mentions, key=mention_sort_key)):
        entity_id = m.entity_id
        if entity_id is None:
            n = fresh.get(m.doc_id, 0)
            fresh[m.doc_id] = n + 1
            entity_id = f"{m.doc_id}_S{n}"
        rows.append(SubmissionRow(run_id, f"{run_id}-{k}", m.text, m.doc_id, m.start, m.end, entity_id,
                                  m.type_path, m.mention_class, max(m.confidence, 1e-12)))
    return rows


def emit(rows: Sequence[SubmissionRow]) -> str:
    return "".join(row.to_line() + "\n" for row in rows)


def parse(text: str) -> list[SubmissionRow]:
    return [SubmissionRow.from_line(line, i) for i, line in enumerate(text.split("\n"), start=1) if line.strip()]


def read_rows(path: str | Path) -> list[SubmissionRow]:
    return parse(Path(path).read_text(encoding="utf-8"))


def write_rows(path: str | Path, rows: Sequence[SubmissionRow]) -> None:
    Path(path).write_text(emit(rows), encoding="utf-8")


def read_mentions(path: str | Path) -> list[Mention]:
    return [row.to_mention() for row in read_rows(path)]
