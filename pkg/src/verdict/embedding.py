"""Embedding providers and vector helpers.

All providers return unit-normalized vectors of a fixed dimension, so cosine
similarity reduces to a dot product. The hash-seeded provider is fully
deterministic (a pure function of the input text) and is what tests and
fixtures run on; real deployments plug in their own provider behind the
same protocol.
"""

from __future__ import annotations

import hashlib
from typing import Protocol

import numpy as np


class EmbeddingError(Exception):
    pass


class DimensionMismatchError(EmbeddingError):
    """Provider produced a vector of the wrong dimension; fatal config error."""


class EmbeddingProvider(Protocol):
    dim: int

    def embed_raw(self, text: str) -> np.ndarray: ...

    def fingerprint(self) -> str: ...


def embed(text: str, provider: EmbeddingProvider) -> np.ndarray:
    """Embed text through a provider, enforcing the unit-norm contract."""
    if not text:
        raise ValueError("cannot embed empty text")
    vec = np.asarray(provider.embed_raw(text), dtype=np.float64)
    if vec.shape != (provider.dim,):
        raise DimensionMismatchError(
            f"provider returned shape {vec.shape}, expected ({provider.dim},)"
        )
    if not np.all(np.isfinite(vec)):
        raise EmbeddingError("provider returned non-finite values")
    norm = float(np.linalg.norm(vec))
    if norm == 0.0:
        raise EmbeddingError("provider returned a zero vector")
    return vec / norm


def cosine(a: np.ndarray, b: np.ndarray) -> float:
    na = float(np.linalg.norm(a))
    nb = float(np.linalg.norm(b))
    if na == 0.0 or nb == 0.0:
        raise ValueError("cosine undefined for zero vectors")
    return float(np.dot(a, b) / (na * nb))


class HashEmbeddingProvider:
    """Deterministic pseudo-random unit vectors seeded by a text hash.

    Identical texts map to identical vectors (so exact duplicates cluster
    at distance zero); unrelated texts land in near-orthogonal directions
    at typical dimensions.
    """

    def __init__(self, dim: int = 64, salt: str = ""):
        if dim < 1:
            raise ValueError("dim must be positive")
        self.dim = dim
        self.salt = salt

    def embed_raw(self, text: str) -> np.ndarray:
        digest = hashlib.sha256((self.salt + text).encode("utf-8")).digest()
        seed = int.from_bytes(digest[:8], "big") % (2**32)
        rng = np.random.RandomState(seed)
        return rng.normal(size=self.dim)

    def fingerprint(self) -> str:
        return f"hash-sha256:d={self.dim}:salt={self.salt}"


class ScriptedEmbeddingProvider:
    """Provider backed by an explicit text -> vector map, for fixtures."""

    def __init__(self, vectors: dict[str, np.ndarray], dim: int,
                 fallback: "EmbeddingProvider | None" = None):
        self.dim = dim
        self._vectors = {k: np.asarray(v, dtype=np.float64) for k, v in vectors.items()}
        self._fallback = fallback

    def embed_raw(self, text: str) -> np.ndarray:
        if text in self._vectors:
            return self._vectors[text]
        if self._fallback is not None:
            return self._fallback.embed_raw(text)
        raise EmbeddingError(f"no scripted vector for text: {text!r}")

    def fingerprint(self) -> str:
        return f"scripted:d={self.dim}:n={len(self._vectors)}"
