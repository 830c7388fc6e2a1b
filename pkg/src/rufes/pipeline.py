"""Corpus-directory IO and the document-level steps the CLI strings together."""

from __future__ import annotations

import logging
from collections import defaultdict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Sequence, TypeVar

from .corpus import Document, LTFParseError, LTFSchemaError, Mention, parse_ltf, to_iob, validate_against_rsd
from .tagger import TaggerModel, Vocab, predict

logger = logging.getLogger(__name__)

LTF_SUFFIX = ".ltf.xml"
RSD_SUFFIX = ".rsd.txt"

T = TypeVar("T")
R = TypeVar("R")


@dataclass
class LoadedCorpus:
    documents: list[Document] = field(default_factory=list)
    failures: list[tuple[str, str]] = field(default_factory=list)  # (file, message)


def _ltf_files(root: Path) -> list[Path]:
    base = root / "ltf" if (root / "ltf").is_dir() else root
    return sorted(base.glob(f"*{LTF_SUFFIX}"))


def _rsd_path(root: Path, stem: str) -> Path | None:
    for base in (root / "rsd", root):
        path = base / f"{stem}{RSD_SUFFIX}"
        if path.is_file():
            return path
    return None


def load_corpus(root: str | Path) -> LoadedCorpus:
    """Parse every ``*.ltf.xml`` (under ``ltf/`` if present) with its RSD, if any.

    Unparseable files are recorded in ``failures`` and skipped.
    """
    root = Path(root)
    out = LoadedCorpus()
    for path in _ltf_files(root):
        stem = path.name[: -len(LTF_SUFFIX)]
        rsd = _rsd_path(root, stem)
        try:
            rsd_text = rsd.read_bytes().decode("utf-8") if rsd else None
            doc = parse_ltf(path.read_bytes(), rsd_len=None if rsd_text is None else len(rsd_text))
        except (LTFParseError, LTFSchemaError, UnicodeDecodeError) as exc:
            logger.error("%s: %s", path, exc)
            out.failures.append((str(path), str(exc)))
            continue
        if rsd_text is not None:
            report = validate_against_rsd(doc, rsd_text)
            for mm in report.mismatches:
                logger.warning("%s: token %s %r does not match RSD text %r",
                               doc.doc_id, mm.token_id, mm.token_text, mm.rsd_text)
            doc = doc.with_rsd(rsd_text)
        out.documents.append(doc)
    out.documents.sort(key=lambda d: d.doc_id)
    return out


def group_by_doc(mentions: Iterable[Mention]) -> dict[str, list[Mention]]:
    groups: dict[str, list[Mention]] = defaultdict(list)
    for m in mentions:
        groups[m.doc_id].append(m)
    return groups


def parallel_map(fn: Callable[[T], R], items: Sequence[T], workers: int = 1) -> list[R]:
    """Order-preserving map over documents, threaded when ``workers > 1``."""
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def training_examples(docs: Sequence[Document], gold: dict[str, list[Mention]], vocab: Vocab,
                      keep_longest: bool = False, snap: bool = False):
    """(token ids, label tracks) per non-empty segment of every document."""
    examples = []
    for doc in docs:
        tracks = to_iob(doc, gold.get(doc.doc_id, []), keep_longest=keep_longest, snap=snap)
        for seg, seg_tracks in zip(doc.segments, tracks.segments):
            if seg.tokens:
                examples.append((vocab.encode(tok.text for tok in seg.tokens), seg_tracks))
    return examples


def tag_documents(model: TaggerModel, docs: Sequence[Document], vocab: Vocab, h=None,
                  workers: int = 1) -> list[Mention]:
    results = parallel_map(lambda d: predict(model, d, vocab, h), docs, workers)
    return [m for ms in results for m in ms]
