"""Word-vector tables, sentence matrices for the CNN, and pooled vectors.

The on-disk format is one entry per line, ``token v_1 ... v_dim``, with an
optional ``count dim`` header line. Vectors are frozen: they are never
updated during training, and out-of-vocabulary tokens share one random
vector drawn once per table.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import TYPE_CHECKING, Iterable, Mapping

import numpy as np

from .errors import DataError

if TYPE_CHECKING:
    from .corpus import QAInstance

OOV_SEED = 0
OOV_RANGE = 0.25
DEFAULT_MAX_LEN = 40

SENTENCE_PARTS = ("pair", "question", "answer")


@dataclass(frozen=True)
class EmbeddingTable:
    """Token -> vector lookup with a shared out-of-vocabulary vector."""

    dim: int
    vectors: dict[str, np.ndarray]
    oov_vector: np.ndarray

    @classmethod
    def from_vectors(cls, vectors: Mapping[str, Iterable[float]], seed: int = OOV_SEED) -> "EmbeddingTable":
        store: dict[str, np.ndarray] = {}
        dim = None
        for token, vec in vectors.items():
            arr = np.asarray(vec, dtype=np.float64)
            if dim is None:
                dim = arr.size
            if arr.shape != (dim,):
                raise DataError(f"vector for {token!r} has length {arr.size}, expected {dim}")
            store[token] = arr
        if dim is None:
            raise DataError("embedding table is empty")
        oov = np.random.default_rng(seed).uniform(-OOV_RANGE, OOV_RANGE, dim)
        return cls(dim=dim, vectors=store, oov_vector=oov)

    def lookup(self, token: str) -> np.ndarray:
        return self.vectors.get(token, self.oov_vector)

    def __len__(self) -> int:
        return len(self.vectors)


@dataclass(frozen=True)
class SentenceMatrix:
    """Fixed-height token x dim matrix; rows at true_len and beyond are zero."""

    data: np.ndarray
    true_len: int

    @property
    def max_len(self) -> int:
        return self.data.shape[0]

    @property
    def dim(self) -> int:
        return self.data.shape[1]


def _is_header(fields: list[str]) -> bool:
    if len(fields) != 2:
        return False
    try:
        int(fields[0]), int(fields[1])
    except ValueError:
        return False
    return True


def load_embeddings(path, expected_dim: int | None = None) -> EmbeddingTable:
    """Load a whitespace-delimited text embedding file.

    The dimension is inferred from the first entry and enforced on every
    later line; a mismatch raises DataError naming the offending line.
    """
    path = Path(path)
    vectors: dict[str, np.ndarray] = {}
    dim: int | None = None
    lines = path.read_text(encoding="utf-8").splitlines()
    start = 0
    if lines and _is_header(lines[0].split()):
        start = 1
    for lineno, line in enumerate(lines[start:], start=start + 1):
        fields = line.split()
        if len(fields) < 2:
            raise DataError(f"{path}:{lineno}: expected 'token v_1 ... v_dim'")
        token, values = fields[0], fields[1:]
        if dim is None:
            dim = len(values)
            if expected_dim is not None and dim != expected_dim:
                raise DataError(f"{path}: embedding dim {dim} does not match expected {expected_dim}")
        elif len(values) != dim:
            raise DataError(f"{path}:{lineno}: expected {dim} vector components, got {len(values)}")
        try:
            vectors[token] = np.array(values, dtype=np.float64)
        except ValueError as exc:
            raise DataError(f"{path}:{lineno}: non-numeric vector component") from exc
    if dim is None:
        raise DataError(f"{path}: no embedding entries found")
    oov = np.random.default_rng(OOV_SEED).uniform(-OOV_RANGE, OOV_RANGE, dim)
    return EmbeddingTable(dim=dim, vectors=vectors, oov_vector=oov)


def save_embeddings(table: EmbeddingTable, path, header: bool = False) -> None:
    """Write a table back to the text format (mainly for fixtures)."""
    lines = []
    if header:
        lines.append(f"{len(table.vectors)} {table.dim}")
    for token, vec in table.vectors.items():
        lines.append(token + " " + " ".join(repr(v) for v in vec))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def embed_sentence(tokens, table: EmbeddingTable, max_len: int = DEFAULT_MAX_LEN) -> SentenceMatrix:
    """Stack token vectors into a zero-padded max_len x dim matrix.

    Sentences longer than max_len are truncated; out-of-vocabulary tokens
    get the table's shared OOV vector.
    """
    if not tokens:
        raise ValueError("cannot embed an empty token sequence")
    if max_len < 2:
        raise ValueError(f"max_len must be at least 2, got {max_len}")
    data = np.zeros((max_len, table.dim))
    true_len = min(len(tokens), max_len)
    for i in range(true_len):
        data[i] = table.lookup(tokens[i])
    return SentenceMatrix(data=data, true_len=true_len)


def sentence_vector(instance: "QAInstance", table: EmbeddingTable, parts: str = "pair") -> np.ndarray:
    """Mean word vector of an instance's text, used for similarity filtering.

    parts selects which text is pooled: the concatenated question+answer
    pair (default), the question alone, or the answer alone.
    """
    if parts == "pair":
        tokens = instance.question_tokens + instance.answer_tokens
    elif parts == "question":
        tokens = instance.question_tokens
    elif parts == "answer":
        tokens = instance.answer_tokens
    else:
        raise ValueError(f"parts must be one of {SENTENCE_PARTS}, got {parts!r}")
    if not tokens:
        raise ValueError("instance has no tokens to pool")
    return np.mean([table.lookup(t) for t in tokens], axis=0)
