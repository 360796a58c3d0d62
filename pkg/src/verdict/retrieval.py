"""Corpus ingestion and two-phase retrieval.

First phase is an exact flat cosine scan over unit-normalized passage
embeddings (exactness keeps the oracle tests meaningful at desk scale);
second phase is optional reranking through a pluggable provider. Query
relaxation broadens the query before retrieval to build a high-recall
universe from a single retriever call.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Protocol

import numpy as np

from .embedding import EmbeddingProvider, embed
from .gateway import BackendError, Gateway, GenerationRequest
from .ledger import CostLedger
from .types import Corpus, Passage, ScoredPassage, Universe, UniverseKind

INDEX_FORMAT_VERSION = 1


class IngestError(Exception):
    pass


@dataclass
class RetrievalConfig:
    k_first: int = 100   # first-phase depth; gives the reranker headroom
    k_final: int = 20    # post-rerank depth
    rerank_enabled: bool = False

    def __post_init__(self) -> None:
        if not (1 <= self.k_final <= self.k_first):
            raise ValueError("require 1 <= k_final <= k_first")


def ingest(path: "str | Path", name: "str | None" = None) -> Corpus:
    """Load a line-delimited JSON corpus file (fields id/title/text)."""
    path = Path(path)
    corpus = Corpus([], name=name or path.stem)
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise IngestError(f"line {lineno}: malformed JSON: {exc}") from exc
            try:
                passage = Passage(
                    id=str(record["id"]),
                    title=str(record.get("title", "")),
                    text=str(record["text"]),
                )
            except (KeyError, ValueError) as exc:
                raise IngestError(f"line {lineno}: bad record: {exc}") from exc
            if passage.id in corpus:
                raise IngestError(f"line {lineno}: duplicate id {passage.id!r}")
            corpus.add(passage)
    return corpus


class VectorIndex:
    """Exact cosine index over a corpus; immutable after build."""

    def __init__(self, corpus: Corpus, provider: EmbeddingProvider,
                 matrix: "np.ndarray | None" = None):
        self.corpus = corpus
        self.provider = provider
        if matrix is None:
            if len(corpus) == 0:
                matrix = np.zeros((0, provider.dim))
            else:
                matrix = np.stack([embed(p.text, provider) for p in corpus])
        self.matrix = matrix  # rows unit-normalized, ingestion order
        # BLAS row blocking can score identical rows a ulp apart; share one
        # score per unique row so exact duplicates tie by ingestion order
        leaders: dict[bytes, int] = {}
        self._row_leader = np.array(
            [leaders.setdefault(row.tobytes(), i)
             for i, row in enumerate(matrix)],
            dtype=np.intp,
        )

    def search(self, query_vec: np.ndarray, k: int) -> list[tuple[int, float]]:
        """Top-k (ingestion index, cosine) pairs; index breaks score ties."""
        if len(self.corpus) == 0 or k < 1:
            return []
        scores = (self.matrix @ query_vec)[self._row_leader]
        order = np.lexsort((np.arange(len(scores)), -scores))
        return [(int(i), float(scores[i])) for i in order[:k]]

    def save(self, path: "str | Path") -> None:
        payload = {
            "format_version": INDEX_FORMAT_VERSION,
            "provider_fingerprint": self.provider.fingerprint(),
            "dim": self.provider.dim,
            "corpus_name": self.corpus.name,
            "passages": [
                {"id": p.id, "title": p.title, "text": p.text}
                for p in self.corpus
            ],
            "vectors": self.matrix.tolist(),
        }
        Path(path).write_text(json.dumps(payload), encoding="utf-8")

    @classmethod
    def load(cls, path: "str | Path", provider: EmbeddingProvider) -> "VectorIndex":
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
        if payload.get("format_version") != INDEX_FORMAT_VERSION:
            raise IngestError("unsupported index format version")
        if payload["provider_fingerprint"] != provider.fingerprint():
            raise IngestError(
                "index provider fingerprint mismatch: "
                f"index={payload['provider_fingerprint']!r} "
                f"provider={provider.fingerprint()!r}"
            )
        corpus = Corpus(
            [Passage(**p) for p in payload["passages"]],
            name=payload.get("corpus_name", "corpus"),
        )
        matrix = np.asarray(payload["vectors"], dtype=np.float64)
        if len(corpus) == 0:
            matrix = matrix.reshape(0, provider.dim)
        return cls(corpus, provider, matrix=matrix)


def retrieve_topk(query: str, index: VectorIndex, k: int,
                  ledger: "CostLedger | None" = None,
                  kind: UniverseKind = UniverseKind.U_Q) -> Universe:
    """k passages maximizing cosine similarity to the embedded query."""
    if k < 1:
        raise ValueError("k must be >= 1")
    if ledger is not None:
        ledger.record_retrieval()
    if len(index.corpus) == 0:
        return Universe(query=query, entries=[], k=k, kind=kind)
    query_vec = embed(query, index.provider)
    hits = index.search(query_vec, k)
    entries = [
        ScoredPassage(passage=index.corpus.passages[i], score=s)
        for i, s in hits
    ]
    return Universe(query=query, entries=entries, k=k, kind=kind)


class RerankProvider(Protocol):
    def score(self, query: str, passage: Passage) -> float: ...


class EmbeddingReranker:
    """Second-phase scorer: cosine under a (possibly different) embedder."""

    def __init__(self, provider: EmbeddingProvider):
        self.provider = provider

    def score(self, query: str, passage: Passage) -> float:
        q = embed(query, self.provider)
        p = embed(passage.text, self.provider)
        return float(np.dot(q, p))


def rerank(query: str, candidates: Universe, k_final: int,
           provider: "RerankProvider | None",
           ledger: "CostLedger | None" = None) -> Universe:
    """Re-score candidates and keep the top k_final.

    With no provider the first-phase order passes through. On provider
    failure the first-phase order is kept (retrieval noise is tolerated
    downstream) and a warning is recorded.
    """
    if not candidates.entries:
        raise ValueError("rerank requires a non-empty candidate universe")
    if provider is None:
        entries = candidates.entries[:k_final]
        return Universe(query=candidates.query, entries=entries,
                        k=k_final, kind=candidates.kind)
    corpus_order = {e.passage.id: i for i, e in enumerate(candidates.entries)}
    try:
        rescored = [
            ScoredPassage(passage=e.passage,
                          score=float(provider.score(query, e.passage)))
            for e in candidates.entries
        ]
    except Exception as exc:
        if ledger is not None:
            ledger.warn(f"rerank failed, falling back to first-phase order: {exc}")
        entries = candidates.entries[:k_final]
        return Universe(query=candidates.query, entries=entries,
                        k=k_final, kind=candidates.kind)
    rescored.sort(key=lambda e: (-e.score, corpus_order[e.passage.id]))
    return Universe(query=candidates.query, entries=rescored[:k_final],
                    k=k_final, kind=candidates.kind)


def relax_query(q: str, gateway: Gateway) -> str:
    """Broaden q for high-recall retrieval; falls back to q itself."""
    if not q:
        raise ValueError("query must be non-empty")
    prompt = gateway.render("I_R", {"question": q})
    request = GenerationRequest(template_id="I_R", rendered_prompt=prompt, tag=q)
    try:
        response = gateway.complete(request)
    except BackendError as exc:
        gateway.ledger.warn(f"query relaxation failed, using original query: {exc}")
        return q
    relaxed = response.text.strip()
    return relaxed if relaxed else q


def build_universe(q: str, config: RetrievalConfig, gateway: Gateway,
                   index: VectorIndex,
                   rerank_provider: "RerankProvider | None" = None) -> Universe:
    """Relax, retrieve once at k_first, optionally rerank down to k_final."""
    relaxed = relax_query(q, gateway)
    first = retrieve_topk(relaxed, index, config.k_first,
                          ledger=gateway.ledger, kind=UniverseKind.U_Q)
    if not first.entries:
        return Universe(query=relaxed, entries=[], k=config.k_final,
                        kind=UniverseKind.U_Q)
    active = rerank_provider if config.rerank_enabled else None
    return rerank(relaxed, first, config.k_final, active, ledger=gateway.ledger)
