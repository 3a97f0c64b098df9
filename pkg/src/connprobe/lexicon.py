"""Connective inventory, tokenization, tagging, and the frequency filter."""

from __future__ import annotations

import csv
import math
import re
from dataclasses import dataclass, field
from enum import Enum
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .errors import DuplicateEntry, EmptyCorpus, EmptyLexicon, UnknownType


class ConnectiveType(Enum):
    ADDITIVE = "additive"
    ADVERSATIVE = "adversative"
    CAUSAL = "causal"
    SEQUENTIAL = "sequential"


@dataclass(frozen=True)
class ConnectiveLexicon:
    """Immutable word -> type inventory of one-word connectives."""

    entries: Mapping[str, ConnectiveType]
    source_note: str = ""

    def __post_init__(self):
        if not self.entries:
            raise EmptyLexicon("lexicon has no entries")
        for word in self.entries:
            if word != word.lower() or any(ch.isspace() for ch in word) or not word:
                raise ValueError(f"lexicon keys must be single lowercase tokens, got {word!r}")

    def __contains__(self, word: str) -> bool:
        return word in self.entries

    def type_of(self, word: str) -> ConnectiveType:
        return self.entries[word]

    def words(self) -> list[str]:
        return sorted(self.entries)


@dataclass(frozen=True)
class Token:
    surface: str
    norm: str
    index: int
    span: tuple[int, int]


@dataclass(frozen=True)
class Occurrence:
    token_index: int
    lemma: str
    ctype: ConnectiveType


@dataclass(frozen=True)
class TaggedSentence:
    text: str
    tokens: tuple[Token, ...]
    occurrences: tuple[Occurrence, ...]

    def norms(self) -> list[str]:
        return [t.norm for t in self.tokens]

    def lemmas(self) -> set[str]:
        return {o.lemma for o in self.occurrences}

    def types(self) -> set[ConnectiveType]:
        return {o.ctype for o in self.occurrences}


@dataclass(frozen=True)
class FrequencyFilterConfig:
    """Keep only connectives ranked in the top `quantile` of word types by count."""

    quantile: float = 0.05
    count_source: tuple[str, ...] = ("train", "test")

    def __post_init__(self):
        if not (0.0 < self.quantile <= 1.0):
            raise ValueError(f"quantile must be in (0, 1], got {self.quantile}")


def default_lexicon_path() -> Path:
    return Path(resources.files("connprobe").joinpath("data/default_lexicon.csv"))


def load_lexicon(path) -> ConnectiveLexicon:
    """Read a `word,type` CSV into a validated lexicon.

    A header row is recognized (and skipped) when its second column is the
    literal string "type". Types are matched case-insensitively.
    """
    path = Path(path)
    entries: dict[str, ConnectiveType] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        for rownum, row in enumerate(csv.reader(fh), start=1):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) < 2:
                raise UnknownType(",".join(row))
            word = row[0].strip().lower()
            typename = row[1].strip().lower()
            if rownum == 1 and typename == "type":
                continue
            try:
                ctype = ConnectiveType(typename)
            except ValueError:
                raise UnknownType(",".join(row)) from None
            if word in entries:
                raise DuplicateEntry(word)
            if not word or any(ch.isspace() for ch in word):
                raise UnknownType(",".join(row))
            entries[word] = ctype
    if not entries:
        raise EmptyLexicon(f"no entries in {path}")
    return ConnectiveLexicon(entries=entries, source_note=str(path))


def load_exclusions(path) -> frozenset[str]:
    """Read a plain-text exclusion list, one lowercase word per line."""
    words = set()
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            word = line.strip().lower()
            if word and not word.startswith("#"):
                words.add(word)
    return frozenset(words)


# Words are \w+ runs; every other non-space character is its own token, so
# the gaps between tokens are whitespace only and the source text can be
# reconstructed from surfaces plus separators.
_TOKEN_RE = re.compile(r"\w+|[^\w\s]", re.UNICODE)


def tokenize(text: str) -> tuple[Token, ...]:
    tokens = []
    for i, m in enumerate(_TOKEN_RE.finditer(text)):
        surface = m.group(0)
        tokens.append(Token(surface=surface, norm=surface.lower(), index=i, span=(m.start(), m.end())))
    return tuple(tokens)


def tag_connectives(
    tokens: Sequence[Token],
    lexicon: ConnectiveLexicon,
    text: str = "",
    exclusions: frozenset[str] = frozenset(),
) -> TaggedSentence:
    """Mark every token whose norm is a lexicon word and not excluded."""
    occurrences = tuple(
        Occurrence(token_index=t.index, lemma=t.norm, ctype=lexicon.type_of(t.norm))
        for t in tokens
        if t.norm in lexicon and t.norm not in exclusions
    )
    return TaggedSentence(text=text, tokens=tuple(tokens), occurrences=occurrences)


def tag_text(text: str, lexicon: ConnectiveLexicon, exclusions: frozenset[str] = frozenset()) -> TaggedSentence:
    """Tokenize then tag in one step."""
    return tag_connectives(tokenize(text), lexicon, text=text, exclusions=exclusions)


def filter_frequent(
    token_counts: Mapping[str, int],
    lexicon: ConnectiveLexicon,
    cfg: FrequencyFilterConfig | None = None,
) -> set[str]:
    """Lexicon words ranked within the top `quantile` fraction of word types.

    Ranking is by raw count over distinct word types; ties at the cutoff are
    included, so membership does not depend on sort order among equals.
    """
    cfg = cfg or FrequencyFilterConfig()
    total = sum(token_counts.values())
    if total <= 0:
        raise EmptyCorpus("token counts are empty")
    ranked = sorted(token_counts.items(), key=lambda kv: (-kv[1], kv[0]))
    cutoff_rank = max(1, math.ceil(cfg.quantile * len(ranked)))
    threshold = ranked[cutoff_rank - 1][1]
    top = {w for w, c in ranked if c >= threshold}
    return {w for w in top if w in lexicon}


def count_tokens(token_seqs: Iterable[Sequence[Token]]) -> dict[str, int]:
    """Count token norms across sentences (punctuation tokens included)."""
    counts: dict[str, int] = {}
    for seq in token_seqs:
        for t in seq:
            counts[t.norm] = counts.get(t.norm, 0) + 1
    return counts
