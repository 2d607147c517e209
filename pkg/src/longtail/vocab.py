"""Vocabulary construction, pretrained embedding ingestion, and encoding.

Index 0 is reserved for padding and index 1 for unknown words; real words
are numbered from 2 in first-seen order. The embedding matrix keeps the
padding row at exactly zero so padded positions contribute nothing to any
downstream convolution sum.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import ArgumentError, FormatError, ParseError
from .numeric import RngStream, Tensor
from .preprocess import ProcessedTweet

log = logging.getLogger(__name__)

PAD_INDEX = 0
UNK_INDEX = 1
PAD_TOKEN = "<pad>"
UNK_TOKEN = "<unk>"

OOV_INIT_LO = -0.25
OOV_INIT_HI = 0.25

EMBEDDING_FORMATS = ("word2vec-text", "glove-text")


class Vocabulary:
    """Bidirectional word/index map with reserved PAD=0 and UNK=1 slots."""

    def __init__(self, words: Iterable[str]) -> None:
        self._words: list[str] = []
        self._index: dict[str, int] = {}
        for word in words:
            if word in (PAD_TOKEN, UNK_TOKEN):
                raise ArgumentError(f"{word!r} is reserved and cannot be a vocabulary word")
            if word not in self._index:
                self._index[word] = 2 + len(self._words)
                self._words.append(word)

    @classmethod
    def from_tweets(cls, tweets: Iterable[ProcessedTweet]) -> "Vocabulary":
        def words():
            for tweet in tweets:
                yield from tweet.tokens
        return cls(words())

    @property
    def size(self) -> int:
        """Number of rows an embedding matrix needs (words + PAD + UNK)."""
        return len(self._words) + 2

    def __contains__(self, word: str) -> bool:
        return word in self._index

    def __len__(self) -> int:
        return len(self._words)

    def index(self, word: str) -> int:
        return self._index.get(word, UNK_INDEX)

    def word(self, idx: int) -> str:
        if idx == PAD_INDEX:
            return PAD_TOKEN
        if idx == UNK_INDEX:
            return UNK_TOKEN
        if 2 <= idx < self.size:
            return self._words[idx - 2]
        raise ArgumentError(f"index {idx} outside vocabulary of size {self.size}")

    def words(self) -> list[str]:
        """Surface words in index order (excluding PAD/UNK)."""
        return list(self._words)

    def save(self, path) -> None:
        """One word per line, index order; PAD/UNK are implicit."""
        with open(path, "w", encoding="utf-8") as handle:
            for word in self._words:
                handle.write(word + "\n")

    @classmethod
    def load(cls, path) -> "Vocabulary":
        with open(path, encoding="utf-8") as handle:
            return cls(line.rstrip("\n") for line in handle if line.rstrip("\n"))


@dataclass
class EmbeddingTable:
    """Pretrained word vectors, all of one dimension."""

    vectors: dict[str, Tensor]
    dim: int


@dataclass
class EmbeddingMatrix:
    """Vocabulary-aligned embedding rows plus out-of-vocabulary bookkeeping."""

    matrix: Tensor
    dim: int
    oov_words: frozenset[str] = field(default_factory=frozenset)
    oov_rate: float = 0.0


def load_embeddings(path, format: str) -> EmbeddingTable:
    """Parse a text embedding file.

    ``word2vec-text`` starts with a "count dim" header line; ``glove-text``
    has no header and the dimension is inferred from the first line. When
    a word repeats, the first vector wins.
    """
    if format not in EMBEDDING_FORMATS:
        raise ArgumentError(f"unknown embedding format {format!r}, expected one of {EMBEDDING_FORMATS}")
    vectors: dict[str, Tensor] = {}
    dim: int | None = None
    declared_count: int | None = None
    data_lines = 0
    with open(path, encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            parts = line.rstrip("\n").split(" ")
            parts = [p for p in parts if p]
            if not parts:
                continue
            if format == "word2vec-text" and lineno == 1:
                if len(parts) != 2:
                    raise ParseError(f"{path}:1: expected 'count dim' header, got {line.rstrip()!r}")
                try:
                    declared_count, dim = int(parts[0]), int(parts[1])
                except ValueError:
                    raise ParseError(f"{path}:1: header fields must be integers") from None
                if dim < 1:
                    raise FormatError(f"{path}:1: embedding dimension must be >= 1, got {dim}")
                continue
            word, values = parts[0], parts[1:]
            if dim is None:
                dim = len(values)
                if dim < 1:
                    raise ParseError(f"{path}:{lineno}: first line has no vector values")
            if len(values) != dim:
                raise FormatError(f"{path}:{lineno}: expected {dim} values, got {len(values)}")
            try:
                vec = np.array([float(v) for v in values], dtype=np.float64)
            except ValueError:
                raise ParseError(f"{path}:{lineno}: non-numeric vector value") from None
            data_lines += 1
            vectors.setdefault(word, vec)
    if dim is None:
        raise ParseError(f"{path}: embedding file has no vectors")
    if declared_count is not None and data_lines != declared_count:
        raise FormatError(f"{path}: header declares {declared_count} vectors, file has {data_lines}")
    return EmbeddingTable(vectors=vectors, dim=dim)


def build_matrix(vocab: Vocabulary, table: EmbeddingTable, seed: int) -> EmbeddingMatrix:
    """Assemble the vocabulary-aligned matrix.

    Known words copy their table vectors; UNK and out-of-vocabulary words
    get seeded uniform[-0.25, 0.25) rows; the PAD row stays zero.
    """
    if len(vocab) == 0:
        raise ArgumentError("cannot build an embedding matrix for an empty vocabulary")
    if table.dim < 1:
        raise ArgumentError(f"embedding dimension must be >= 1, got {table.dim}")
    rng = RngStream(seed)
    matrix = np.zeros((vocab.size, table.dim), dtype=np.float64)
    matrix[UNK_INDEX] = rng.uniform(OOV_INIT_LO, OOV_INIT_HI, table.dim)
    oov: set[str] = set()
    for idx in range(2, vocab.size):
        word = vocab.word(idx)
        vec = table.vectors.get(word)
        if vec is None:
            oov.add(word)
            matrix[idx] = rng.uniform(OOV_INIT_LO, OOV_INIT_HI, table.dim)
        else:
            matrix[idx] = vec
    rate = len(oov) / len(vocab)
    log.info("embedding matrix: %d words, %d OOV (%.1f%%)", len(vocab), len(oov), 100 * rate)
    return EmbeddingMatrix(matrix=matrix, dim=table.dim, oov_words=frozenset(oov), oov_rate=rate)


def encode(tweet: ProcessedTweet, vocab: Vocabulary, max_len: int = 100) -> np.ndarray:
    """Map tokens to indices, truncating/padding to exactly ``max_len``."""
    if max_len < 1:
        raise ArgumentError(f"max_len must be >= 1, got {max_len}")
    out = np.full(max_len, PAD_INDEX, dtype=np.int64)
    for pos, token in enumerate(tweet.tokens[:max_len]):
        out[pos] = vocab.index(token)
    return out


def decode(indices: Sequence[int], vocab: Vocabulary) -> list[str]:
    """Inverse of :func:`encode` up to padding and unknown words."""
    words: list[str] = []
    for idx in indices:
        if idx == PAD_INDEX:
            break
        words.append(vocab.word(int(idx)))
    return words


def encode_dataset(tweets: Sequence[ProcessedTweet], vocab: Vocabulary,
                   max_len: int = 100) -> np.ndarray:
    """Encode a whole dataset into an int64 matrix of shape [N, max_len]."""
    out = np.full((len(tweets), max_len), PAD_INDEX, dtype=np.int64)
    for row, tweet in enumerate(tweets):
        out[row] = encode(tweet, vocab, max_len)
    return out
