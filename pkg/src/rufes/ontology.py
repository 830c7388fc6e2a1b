"""Three-level x.y.z entity type hierarchy and ontology-driven type repair."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

logger = logging.getLogger(__name__)

MAX_DEPTH = 3


class OntologyFormatError(ValueError):
    """Raised for malformed ontology lines."""

    def __init__(self, message: str, line_no: int | None = None) -> None:
        self.line_no = line_no
        if line_no is not None:
            message = f"line {line_no}: {message}"
        super().__init__(message)


@dataclass(frozen=True, order=True)
class TypePath:
    """Hierarchical entity type, e.g. ``PER.Artist.Photographer``."""

    levels: tuple[str, ...]

    def __post_init__(self) -> None:
        levels = tuple(self.levels)
        object.__setattr__(self, "levels", levels)
        if not 1 <= len(levels) <= MAX_DEPTH:
            raise OntologyFormatError(f"type path must have 1-{MAX_DEPTH} levels, got {len(levels)}")
        for name in levels:
            if not name or "." in name or name != name.strip():
                raise OntologyFormatError(f"invalid type name {name!r}")

    @classmethod
    def parse(cls, dotted: str) -> TypePath:
        return cls(tuple(dotted.strip().split(".")))

    def __str__(self) -> str:
        return ".".join(self.levels)

    def __len__(self) -> int:
        return len(self.levels)

    @property
    def leaf(self) -> str:
        return self.levels[-1]

    def prefix(self, n: int) -> TypePath:
        return TypePath(self.levels[:n])

    def is_strict_ancestor_of(self, other: TypePath) -> bool:
        return len(self) < len(other) and other.levels[: len(self)] == self.levels


def ancestors(path: TypePath) -> list[TypePath]:
    """Strict prefixes of ``path``, shortest first."""
    return [path.prefix(n) for n in range(1, len(path))]


@dataclass
class TypeHierarchy:
    roots: set[str] = field(default_factory=set)
    children: dict[tuple[str, ...], set[str]] = field(default_factory=dict)
    leaf_index: dict[str, set[TypePath]] = field(default_factory=dict)

    @property
    def paths(self) -> set[TypePath]:
        return {p for ps in self.leaf_index.values() for p in ps}

    def __len__(self) -> int:
        return sum(len(ps) for ps in self.leaf_index.values())

    def __contains__(self, path: TypePath) -> bool:
        return path in self.leaf_index.get(path.leaf, ())

    def is_leaf(self, path: TypePath) -> bool:
        return path in self and not self.children.get(path.levels)

    def leaves(self) -> list[TypePath]:
        return sorted(p for p in self.paths if self.is_leaf(p))

    def add(self, path: TypePath) -> None:
        for n in range(1, len(path) + 1):
            prefix = path.prefix(n)
            if n == 1:
                self.roots.add(prefix.leaf)
            else:
                self.children.setdefault(prefix.levels[:-1], set()).add(prefix.leaf)
            self.leaf_index.setdefault(prefix.leaf, set()).add(prefix)


def load_ontology(text: str) -> TypeHierarchy:
    """Parse one dotted path per line; ``#`` starts a comment."""
    h = TypeHierarchy()
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split(".")
        if len(parts) > MAX_DEPTH:
            raise OntologyFormatError(f"{line!r} has {len(parts)} levels (max {MAX_DEPTH})", line_no)
        try:
            h.add(TypePath(tuple(parts)))
        except OntologyFormatError as exc:
            raise OntologyFormatError(str(exc), line_no) from None
    return h


def _suffix_len(a: tuple[str, ...], b: tuple[str, ...]) -> int:
    n = 0
    while n < min(len(a), len(b)) and a[-1 - n] == b[-1 - n]:
        n += 1
    return n


def resolve_leaf(predicted: TypePath, candidates: set[TypePath]) -> TypePath:
    """Choose among ontology paths sharing the predicted leaf name.

    Longest shared suffix with the prediction wins; remaining ties go to the
    lexicographically smallest path (with a warning).
    """
    if len(candidates) == 1:
        return next(iter(candidates))
    best = max(_suffix_len(predicted.levels, c.levels) for c in candidates)
    tied = sorted(c for c in candidates if _suffix_len(predicted.levels, c.levels) == best)
    if len(tied) > 1:
        logger.warning(
            "ambiguous type %s: candidates %s, choosing %s",
            predicted, ", ".join(map(str, tied)), tied[0],
        )
    return tied[0]


def correct_type(predicted: TypePath, h: TypeHierarchy) -> TypePath:
    """Repair ``predicted`` against the ontology.

    Valid paths are returned as-is. Otherwise the deepest predicted name is
    trusted most: it is looked up in the leaf index and replaced by the
    ontology path ending in it. Failing that, the longest valid prefix is
    used. When nothing matches the input comes back unchanged and a warning
    is logged (callers can detect this with ``predicted in h``).
    """
    if predicted in h:
        return predicted
    candidates = h.leaf_index.get(predicted.leaf)
    if candidates:
        return resolve_leaf(predicted, candidates)
    for depth in range(len(predicted) - 1, 0, -1):
        prefix = predicted.prefix(depth)
        if prefix in h:
            return prefix
    logger.warning("type %s has no match in the ontology; left unchanged", predicted)
    return predicted
