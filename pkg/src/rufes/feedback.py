"""Rule-based retyping of mentions whose text contains an ontology term."""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable, Sequence

from .corpus import Mention
from .ontology import TypeHierarchy, TypePath

logger = logging.getLogger(__name__)

TOKEN, SUBSTRING = "token", "substring"
_WORD = re.compile(r"\w+")


class RuleError(ValueError):
    pass


@dataclass(frozen=True)
class Rule:
    trigger: str
    match_mode: str
    target: TypePath

    def __post_init__(self) -> None:
        if not self.trigger.strip():
            raise RuleError("rule trigger must be non-empty")
        if self.match_mode not in (TOKEN, SUBSTRING):
            raise RuleError(f"unknown match mode {self.match_mode!r}")

    def sort_key(self) -> tuple:
        return (-len(self.trigger), self.trigger, self.match_mode, str(self.target))

    def matches(self, text: str) -> bool:
        if self.match_mode == SUBSTRING:
            return self.trigger.lower() in text.lower()
        words = [w.lower() for w in _WORD.findall(text)]
        needle = [w.lower() for w in _WORD.findall(self.trigger)]
        if not needle:
            return False
        return any(words[i : i + len(needle)] == needle for i in range(len(words) - len(needle) + 1))


@dataclass(frozen=True)
class RuleSet:
    """Rules in application order: longest trigger first, then lexicographic."""

    rules: tuple[Rule, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "rules", tuple(sorted(dict.fromkeys(self.rules), key=Rule.sort_key)))

    def __len__(self) -> int:
        return len(self.rules)

    def __iter__(self):
        return iter(self.rules)

    def first_match(self, text: str) -> Rule | None:
        return next((r for r in self.rules if r.matches(text)), None)


def compile_rules(h: TypeHierarchy, extra: Iterable[Rule] = (), include_leaves: bool = True) -> RuleSet:
    """One token rule per leaf name that identifies a single ontology path,
    plus ``extra`` rules (whose targets must exist in the ontology).
    """
    rules = []
    for leaf in h.leaves() if include_leaves else ():
        paths = h.leaf_index[leaf.leaf]
        if len(paths) > 1:
            logger.warning("leaf %s is ambiguous (%s); no rule compiled",
                           leaf.leaf, ", ".join(sorted(map(str, paths))))
            continue
        rules.append(Rule(leaf.leaf, TOKEN, leaf))
    for rule in extra:
        if rule.target not in h:
            raise RuleError(f"rule {rule.trigger!r} targets {rule.target}, which is not in the ontology")
        rules.append(rule)
    return RuleSet(tuple(rules))


def apply_rules(mentions: Sequence[Mention], rules: RuleSet) -> list[Mention]:
    """Retype each mention by its first matching rule; only ``type_path`` ever changes."""
    out = []
    for m in mentions:
        rule = rules.first_match(m.text)
        out.append(m if rule is None or rule.target == m.type_path else replace(m, type_path=rule.target))
    return out


def parse_rules(text: str) -> list[Rule]:
    """``trigger<TAB>mode<TAB>dotted.path`` per line; ``#`` comments and blank lines skipped."""
    rules = []
    for line_no, line in enumerate(text.splitlines(), start=1):
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        cols = line.split("\t")
        if len(cols) != 3:
            raise RuleError(f"line {line_no}: expected 3 TAB-separated columns, got {len(cols)}")
        try:
            rules.append(Rule(cols[0], cols[1].strip(), TypePath.parse(cols[2])))
        except ValueError as exc:
            raise RuleError(f"line {line_no}: {exc}") from None
    return rules


def load_rules(path: str | Path) -> list[Rule]:
    return parse_rules(Path(path).read_text(encoding="utf-8"))
