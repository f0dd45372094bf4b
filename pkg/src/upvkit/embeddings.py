"""Frozen word-vector store with deterministic out-of-vocabulary fallback.

Vectors are read once from the common whitespace text format and never
trained.  OOV tokens matter here: interview transcriptions are full of
spelling variants, so the default policy hashes character 3-5-grams into a
fixed bucket table so that a misspelling shares most of its vector with the
intended word.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Sequence, TextIO

import numpy as np

from .taxonomy import Taxonomy
from .util import stable_hash_u64

OOV_POLICIES = ("subword_hash", "random_fixed", "zero")
SUBWORD_BUCKETS = 10_007
_NGRAM_RANGE = (3, 5)


class VectorFormatError(ValueError):
    pass


@dataclass
class EmbeddingTable:
    """Immutable token-to-vector store; rows are float64 and never change."""

    dim: int
    vocab: dict[str, int] = field(repr=False)
    matrix: np.ndarray = field(repr=False)
    oov_policy: str = "subword_hash"

    def __post_init__(self) -> None:
        if self.dim <= 0:
            raise ValueError("dim must be positive")
        if self.oov_policy not in OOV_POLICIES:
            raise ValueError(f"unknown oov policy {self.oov_policy!r}")
        if not np.all(np.isfinite(self.matrix)):
            raise VectorFormatError("non-finite vector component")
        self.matrix.setflags(write=False)
        self._oov_cache: dict[str, np.ndarray] = {}
        self._bucket_cache: dict[int, np.ndarray] = {}

    def __contains__(self, token: str) -> bool:
        return token in self.vocab

    def __len__(self) -> int:
        return len(self.vocab)

    @classmethod
    def empty(cls, dim: int = 300, oov_policy: str = "random_fixed") -> "EmbeddingTable":
        return cls(dim=dim, vocab={}, matrix=np.zeros((0, dim)), oov_policy=oov_policy)


def load_vectors(stream: TextIO, oov_policy: str = "subword_hash") -> EmbeddingTable:
    """Parse ``count dim`` header plus one ``token v1 ... v_dim`` line each.

    A duplicate token keeps its first row (with a warning); any dimension
    mismatch or non-numeric component reports the offending line.
    """
    header = stream.readline().split()
    if len(header) != 2:
        raise VectorFormatError("line 1: expected header 'count dim'")
    try:
        count, dim = int(header[0]), int(header[1])
    except ValueError:
        raise VectorFormatError("line 1: non-integer header") from None
    if count < 0 or dim <= 0:
        raise VectorFormatError("line 1: invalid header values")
    matrix = np.zeros((count, dim))
    vocab: dict[str, int] = {}
    rows = 0
    for lineno, line in enumerate(stream, start=2):
        parts = line.rstrip("\n").split(" ")
        parts = [p for p in parts if p != ""]
        if not parts:
            continue
        if rows >= count:
            raise VectorFormatError(f"line {lineno}: more rows than declared ({count})")
        token = parts[0]
        if len(parts) - 1 != dim:
            raise VectorFormatError(
                f"line {lineno}: expected {dim} components, got {len(parts) - 1}"
            )
        try:
            vec = np.array([float(p) for p in parts[1:]])
        except ValueError:
            raise VectorFormatError(f"line {lineno}: non-numeric component") from None
        matrix[rows] = vec
        if token in vocab:
            warnings.warn(f"line {lineno}: duplicate token {token!r}, keeping first")
        else:
            vocab[token] = rows
        rows += 1
    if rows != count:
        raise VectorFormatError(f"declared {count} rows but found {rows}")
    return EmbeddingTable(dim=dim, vocab=vocab, matrix=matrix, oov_policy=oov_policy)


def _unit_vector(seed: int, dim: int) -> np.ndarray:
    v = np.random.default_rng(seed).standard_normal(dim)
    norm = np.linalg.norm(v)
    return v / norm if norm > 0 else v


def _char_ngrams(token: str) -> list[str]:
    padded = f"<{token}>"
    lo, hi = _NGRAM_RANGE
    grams = []
    for n in range(lo, hi + 1):
        grams.extend(padded[i : i + n] for i in range(len(padded) - n + 1))
    return grams


def lookup(token: str, table: EmbeddingTable) -> np.ndarray:
    """Vector for ``token``: stored row if known, policy fallback otherwise.

    Pure in (token, table, policy); repeated calls are bit-identical.
    """
    idx = table.vocab.get(token)
    if idx is not None:
        return table.matrix[idx]
    cached = table._oov_cache.get(token)
    if cached is not None:
        return cached
    if table.oov_policy == "zero":
        vec = np.zeros(table.dim)
    elif table.oov_policy == "random_fixed":
        vec = _unit_vector(stable_hash_u64("oov", token), table.dim)
    else:
        grams = _char_ngrams(token)
        if not grams:
            vec = np.zeros(table.dim)
        else:
            acc = np.zeros(table.dim)
            for gram in grams:
                bucket = stable_hash_u64("ngram", gram) % SUBWORD_BUCKETS
                bvec = table._bucket_cache.get(bucket)
                if bvec is None:
                    bvec = _unit_vector(stable_hash_u64("bucket", bucket), table.dim)
                    bvec.setflags(write=False)
                    table._bucket_cache[bucket] = bvec
                acc += bvec
            vec = acc / len(grams)
            # rescale to unit length: the mean of many near-orthogonal bucket
            # vectors has norm ~1/sqrt(k), which starves downstream layers of
            # signal for long tokens; direction (and cosine) is unchanged
            norm = np.linalg.norm(vec)
            if norm > 0:
                vec = vec / norm
    vec.setflags(write=False)
    table._oov_cache[token] = vec
    return vec


def label_embedding(label: str, tax: Taxonomy, table: EmbeddingTable, max_tokens: int = 4) -> np.ndarray:
    """Elementwise max over the vectors of the label's name tokens."""
    node = tax.node(label)
    tokens = node.name_tokens(max_tokens=max_tokens)
    if len(node.name.split()) > max_tokens:
        warnings.warn(f"label {label!r} name longer than {max_tokens} tokens; truncated")
    vecs = np.stack([lookup(t, table) for t in tokens])
    return vecs.max(axis=0)


@dataclass(frozen=True)
class EncodedSequence:
    """Fixed-length embedded sequence with a validity mask."""

    matrix: np.ndarray
    mask: np.ndarray
    true_length: int


def encode_sequence(tokens: Sequence[str], max_len: int, table: EmbeddingTable) -> EncodedSequence:
    """Embed the first ``max_len`` tokens; pad the rest with zero rows."""
    if max_len <= 0:
        raise ValueError("max_len must be positive")
    n = min(len(tokens), max_len)
    matrix = np.zeros((max_len, table.dim))
    for i in range(n):
        matrix[i] = lookup(tokens[i], table)
    mask = np.zeros(max_len, dtype=bool)
    mask[:n] = True
    return EncodedSequence(matrix=matrix, mask=mask, true_length=n)
