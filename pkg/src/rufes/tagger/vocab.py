from __future__ import annotations

from collections import Counter
from pathlib import Path
from typing import Iterable

from .layers import PAD_ID, UNK_ID

PAD = "<pad>"
UNK = "<unk>"


class Vocab:
    """Token vocabulary; id 0 is padding, id 1 unknown."""

    def __init__(self, tokens: Iterable[str] = ()) -> None:
        self.itos = [PAD, UNK]
        self.stoi = {PAD: PAD_ID, UNK: UNK_ID}
        for tok in tokens:
            self.add(tok)

    def add(self, token: str) -> int:
        if "\n" in token:
            raise ValueError(f"token {token!r} contains a newline")
        if token not in self.stoi:
            self.stoi[token] = len(self.itos)
            self.itos.append(token)
        return self.stoi[token]

    @classmethod
    def build(cls, sentences: Iterable[Iterable[str]], min_count: int = 1) -> Vocab:
        counts = Counter(tok for sent in sentences for tok in sent)
        # First-seen order keeps ids stable for a given corpus order.
        return cls(tok for tok, n in counts.items() if n >= min_count)

    def __len__(self) -> int:
        return len(self.itos)

    def __contains__(self, token: str) -> bool:
        return token in self.stoi

    def encode(self, tokens: Iterable[str]) -> list[int]:
        return [self.stoi.get(tok, UNK_ID) for tok in tokens]

    def save(self, path: str | Path) -> None:
        Path(path).write_text("".join(tok + "\n" for tok in self.itos), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> Vocab:
        lines = Path(path).read_text(encoding="utf-8").split("\n")
        if lines and lines[-1] == "":
            lines.pop()
        if lines[:2] != [PAD, UNK]:
            raise ValueError(f"{path}: first two lines must be {PAD} and {UNK}")
        return cls(lines[2:])
