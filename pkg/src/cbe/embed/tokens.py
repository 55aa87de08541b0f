"""Tokenization and vocabulary construction."""

from __future__ import annotations

import re
from collections import Counter
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field

from cbe.errors import EmptyAfterFiltering

# A token is an optional run of leading '#' followed by word characters, with
# single hyphens allowed between word pieces ("higher-calorie", "#pro-ana").
_TOKEN_RE = re.compile(r"#*\w+(?:-\w+)*")


def tokenize(clean_text: str) -> list[str]:
    """Split preprocessed text into tokens.

    Whitespace and punctuation separate tokens, except that a leading ``#``
    and hyphens between word characters are kept.

    >>> tokenize("#proana!! higher-calorie, diets")
    ['#proana', 'higher-calorie', 'diets']
    """
    return _TOKEN_RE.findall(clean_text)


@dataclass
class Vocabulary:
    tokens: list[str]
    counts: dict[str, int]
    index: dict[str, int] = field(default_factory=dict)

    def __post_init__(self):
        if not self.index:
            self.index = {tok: i for i, tok in enumerate(self.tokens)}

    @property
    def total_count(self) -> int:
        return sum(self.counts.values())

    def __len__(self) -> int:
        return len(self.tokens)

    def __contains__(self, token: str) -> bool:
        return token in self.index

    def frequencies(self) -> dict[str, float]:
        """Relative frequency of every token, summing to one."""
        total = self.total_count
        return {tok: self.counts[tok] / total for tok in self.tokens}


def build_vocab(sequences: Iterable[Sequence[str]], min_count: int = 1) -> Vocabulary:
    """Count tokens and keep those seen at least ``min_count`` times.

    Tokens are ordered by descending count, then lexicographically.
    """
    if min_count < 1:
        raise ValueError("min_count must be >= 1")
    counter: Counter[str] = Counter()
    for seq in sequences:
        counter.update(seq)
    kept = [(tok, c) for tok, c in counter.items() if c >= min_count]
    if not kept:
        raise EmptyAfterFiltering(f"no token occurs at least {min_count} times")
    kept.sort(key=lambda tc: (-tc[1], tc[0]))
    return Vocabulary(tokens=[t for t, _ in kept], counts=dict(kept))
