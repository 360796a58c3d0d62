"""Shared fixtures: tiny corpora, scripted backends, and oracle helpers."""

from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest

from verdict.embedding import HashEmbeddingProvider
from verdict.gateway import BackendError, Gateway, ScriptedBackend
from verdict.ledger import CostLedger
from verdict.retrieval import VectorIndex
from verdict.types import Corpus, Passage

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"


def make_corpus(n: int, prefix: str = "p") -> Corpus:
    return Corpus([
        Passage(id=f"{prefix}{i:03d}", title=f"title {i}",
                text=f"passage body number {i} about topic {i % 7}")
        for i in range(n)
    ])


@pytest.fixture
def provider():
    return HashEmbeddingProvider(dim=32)


@pytest.fixture
def small_index(provider):
    return VectorIndex(make_corpus(12), provider)


def scripted_gateway(script: dict, ledger: "CostLedger | None" = None,
                     retries: int = 2) -> Gateway:
    return Gateway(ScriptedBackend(script), ledger=ledger or CostLedger(),
                   retries=retries)


class FlakyBackend:
    """Fails a fixed number of times, then delegates to a scripted answer."""

    backend_id = "flaky"

    def __init__(self, failures: int, text: str = "ok"):
        self.failures = failures
        self.text = text
        self.attempts = 0

    def generate(self, template_id: str, prompt: str, tag: str) -> str:
        self.attempts += 1
        if self.attempts <= self.failures:
            raise BackendError("synthetic transport failure")
        return self.text


def random_unit_vectors(rng: np.random.RandomState, n: int, d: int) -> np.ndarray:
    v = rng.normal(size=(n, d))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def brute_force_prim(weights: np.ndarray) -> float:
    """Independent MST oracle: textbook Prim with explicit loops."""
    n = weights.shape[0]
    if n < 2:
        return 0.0
    weights = weights.tolist()  # plain floats; keeps the loops honest and fast
    visited = [0]
    total = 0.0
    remaining = set(range(1, n))
    while remaining:
        best = None
        for u in visited:
            for v in remaining:
                w = weights[u][v]
                if best is None or w < best[0]:
                    best = (w, v)
        total += best[0]
        visited.append(best[1])
        remaining.remove(best[1])
    return total
