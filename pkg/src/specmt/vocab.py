"""Vocabulary, token id conventions, and corpus file handling."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

# Reserved ids are fixed; everything downstream (traces, lexicons, models)
# relies on this exact assignment.
BOS = 0
EOS = 1
PHI = 2
UNK = 3

BOS_SURFACE = "<s>"
EOS_SURFACE = "</s>"
PHI_SURFACE = "<phi>"
UNK_SURFACE = "<unk>"

RESERVED_SURFACES = (BOS_SURFACE, EOS_SURFACE, PHI_SURFACE, UNK_SURFACE)

# A sentence is a tuple of token ids, free of BOS/EOS/PHI markers.
Sentence = tuple[int, ...]


class VocabularyError(ValueError):
    pass


@dataclass(frozen=True)
class Vocabulary:
    """Immutable surface<->id mapping with the four reserved ids up front.

    Ids are dense: reserved ids 0..3, then regular tokens in construction
    order. Files always store surface strings; ids exist in memory only.
    """

    tokens: tuple[str, ...]
    _index: dict[str, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if self.tokens[:4] != RESERVED_SURFACES:
            raise VocabularyError("reserved tokens missing or misplaced")
        index = {}
        for i, tok in enumerate(self.tokens):
            if tok in index:
                raise VocabularyError(f"duplicate surface token {tok!r}")
            index[tok] = i
        object.__setattr__(self, "_index", index)

    def __len__(self) -> int:
        return len(self.tokens)

    @property
    def regular_ids(self) -> range:
        """Ids of non-reserved tokens."""
        return range(4, len(self.tokens))

    def lookup(self, surface: str) -> int:
        """Surface -> id, UNK for unknown surfaces."""
        return self._index.get(surface, UNK)

    def surface(self, token_id: int) -> str:
        return self.tokens[token_id]

    def encode(self, line: str) -> Sentence:
        return tuple(self.lookup(tok) for tok in line.split())

    def decode(self, ids: Iterable[int]) -> str:
        return " ".join(self.tokens[i] for i in ids)


def build_vocabulary(corpus: Iterable[str]) -> Vocabulary:
    """Build a vocabulary from whitespace-tokenized lines.

    Reserved ids come first, regular tokens follow in first-occurrence
    order, so the mapping is deterministic for a given corpus.
    """
    tokens: list[str] = list(RESERVED_SURFACES)
    seen = set(RESERVED_SURFACES)
    empty = True
    for line in corpus:
        empty = False
        for tok in line.split():
            if tok not in seen:
                seen.add(tok)
                tokens.append(tok)
    if empty:
        raise VocabularyError("empty corpus")
    return Vocabulary(tuple(tokens))


def read_corpus_lines(path: str | Path) -> list[str]:
    """Read a corpus file: UTF-8, one sentence per line, blank lines dropped."""
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    return [line.strip() for line in lines if line.strip()]


def write_corpus_lines(path: str | Path, lines: Iterable[str]) -> None:
    Path(path).write_text("".join(line + "\n" for line in lines), encoding="utf-8")


def encode_source(line: str, vocab: Vocabulary) -> Sentence:
    """Encode a source sentence, rejecting reserved markers in the text."""
    ids = vocab.encode(line)
    if BOS in ids or PHI in ids or EOS in ids:
        raise VocabularyError(f"reserved marker in source sentence: {line!r}")
    return ids


def load_corpus(path: str | Path, vocab: Vocabulary) -> list[Sentence]:
    return [encode_source(line, vocab) for line in read_corpus_lines(path)]
