"""Hashed text features for the relevance classifier.

A query/target pair is featurized as field-tagged word unigrams plus
character trigrams of the pair joined with a unit separator, hashed into
2**hash_bits buckets with a stable 64-bit hash. Collisions are accepted.
"""
from __future__ import annotations

import hashlib
from collections import Counter
from dataclasses import dataclass

import numpy as np

DEFAULT_HASH_BITS = 18

_FIELD_SEP = "\x1f"


def stable_hash64(s: str) -> int:
    """Process-independent 64-bit hash (unlike builtin hash, not salted per run)."""
    return int.from_bytes(hashlib.blake2b(s.encode("utf-8"), digest_size=8).digest(), "little")


@dataclass(frozen=True)
class FeatureVector:
    """Sparse counts over hashed feature indices; indices sorted and unique."""

    indices: np.ndarray  # int64, sorted ascending
    counts: np.ndarray  # float64, aligned with indices

    def __post_init__(self) -> None:
        assert self.indices.shape == self.counts.shape

    @property
    def nnz(self) -> int:
        return int(self.indices.size)


def featurize(query: str, target: str, hash_bits: int = DEFAULT_HASH_BITS) -> FeatureVector:
    """Hash word unigrams (query- and target-tagged) and pair character trigrams."""
    mask = (1 << hash_bits) - 1
    feats: Counter[int] = Counter()
    for tok in query.split():
        feats[stable_hash64("q" + _FIELD_SEP + tok) & mask] += 1
    for tok in target.split():
        feats[stable_hash64("t" + _FIELD_SEP + tok) & mask] += 1
    joined = query + _FIELD_SEP + target
    for i in range(len(joined) - 2):
        feats[stable_hash64("3" + _FIELD_SEP + joined[i : i + 3]) & mask] += 1
    if not feats:
        return FeatureVector(np.empty(0, dtype=np.int64), np.empty(0, dtype=np.float64))
    indices = np.array(sorted(feats), dtype=np.int64)
    counts = np.array([feats[i] for i in indices], dtype=np.float64)
    return FeatureVector(indices, counts)


def word_unigram_indices(text: str, field: str, hash_bits: int = DEFAULT_HASH_BITS) -> set[int]:
    """Hashed indices of the field-tagged word unigrams alone (test/introspection aid)."""
    mask = (1 << hash_bits) - 1
    return {stable_hash64(field + _FIELD_SEP + tok) & mask for tok in text.split()}


def stack_csr(vectors: list[FeatureVector]) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Concatenate feature vectors into CSR-style (indptr, indices, counts) arrays."""
    indptr = np.zeros(len(vectors) + 1, dtype=np.int64)
    for i, vec in enumerate(vectors):
        indptr[i + 1] = indptr[i] + vec.nnz
    total = int(indptr[-1])
    indices = np.empty(total, dtype=np.int64)
    counts = np.empty(total, dtype=np.float64)
    for i, vec in enumerate(vectors):
        indices[indptr[i] : indptr[i + 1]] = vec.indices
        counts[indptr[i] : indptr[i + 1]] = vec.counts
    return indptr, indices, counts
