"""Consolidation: cluster candidate pairs and keep one medoid per cluster.

Noisy per-passage feedback is denoised by consistency: pairs expressing the
same interpretation land close in embedding space, clusters pick their
medoid as the representative, and outliers are dropped (or kept as
singleton items, the default, since typical queries only yield a handful
of interpretations and aggressive noise-dropping destroys recall).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .embedding import EmbeddingProvider, embed
from .hdbscan import hdbscan_labels
from .types import (
    CandidatePair,
    ClarificationItem,
    ClarificationSet,
    DiversificationResult,
    SetSource,
)

DEFAULT_SEPARATOR = " ||| "


@dataclass
class ConsolidationConfig:
    mode: str = "default"            # "default" | "conservative"
    embed_mode: str = "pair"         # "pair" | "question_only"
    min_cluster_size: int = 2
    min_samples: int = 1
    allow_singletons: bool = True    # keep noise points as singleton items
    separator: str = DEFAULT_SEPARATOR

    def __post_init__(self) -> None:
        if self.embed_mode not in ("pair", "question_only"):
            raise ValueError(f"unknown embed_mode: {self.embed_mode}")
        if not self.allow_singletons and self.min_cluster_size < 2:
            raise ValueError(
                "min_cluster_size must be >= 2 when singletons are dropped"
            )

    @classmethod
    def default(cls) -> "ConsolidationConfig":
        return cls()

    @classmethod
    def conservative(cls) -> "ConsolidationConfig":
        # Fewer, larger clusters; noise is dropped rather than kept.
        return cls(mode="conservative", min_cluster_size=3,
                   allow_singletons=False)


@dataclass(frozen=True)
class EmbeddedPair:
    pair: CandidatePair
    vector: np.ndarray


@dataclass
class ClusterSet:
    clusters: list[list[int]] = field(default_factory=list)
    noise: list[int] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"clusters": [list(c) for c in self.clusters],
                "noise": list(self.noise)}


def embed_pair(pair: CandidatePair, mode: str,
               provider: EmbeddingProvider,
               separator: str = DEFAULT_SEPARATOR) -> EmbeddedPair:
    """Embed a candidate pair, jointly or by interpretation alone."""
    if mode == "pair":
        text = pair.interpretation + separator + pair.answer
    elif mode == "question_only":
        text = pair.interpretation
    else:
        raise ValueError(f"unknown embed mode: {mode}")
    return EmbeddedPair(pair=pair, vector=embed(text, provider))


def cluster(vectors: list[np.ndarray],
            config: ConsolidationConfig) -> ClusterSet:
    """HDBSCAN partition of the vectors; indices refer to input order."""
    if not vectors:
        return ClusterSet()
    labels = hdbscan_labels(
        np.stack(vectors),
        min_cluster_size=config.min_cluster_size,
        min_samples=config.min_samples,
    )
    result = ClusterSet()
    by_label: dict[int, list[int]] = {}
    for i, label in enumerate(labels):
        if label == -1:
            result.noise.append(i)
        else:
            by_label.setdefault(int(label), []).append(i)
    result.clusters = [by_label[k] for k in sorted(by_label)]
    return result


def select_medoid(members: list[EmbeddedPair]) -> CandidatePair:
    """Member maximizing total cosine similarity to all members.

    Self-similarity is included (it shifts every sum equally); exact ties
    go to the lowest extraction_index.
    """
    if not members:
        raise ValueError("cannot select a medoid from an empty cluster")
    matrix = np.stack([m.vector for m in members])
    sums = (matrix @ matrix.T).sum(axis=1)
    best = min(
        range(len(members)),
        key=lambda i: (-sums[i], members[i].pair.extraction_index),
    )
    return members[best].pair


def consolidate(result: DiversificationResult, config: ConsolidationConfig,
                provider: EmbeddingProvider,
                query: str = "") -> ClarificationSet:
    """Embed, cluster, and reduce candidate pairs to medoid items.

    Items are ordered by cluster size descending, then by the medoid's
    extraction index; noise points become singleton items only when
    allow_singletons is set.
    """
    if not result.pairs:
        return ClarificationSet(items=[], source=SetSource.VERDICT, query=query)
    embedded = [
        embed_pair(p, config.embed_mode, provider, config.separator)
        for p in result.pairs
    ]
    clusters = cluster([e.vector for e in embedded], config)

    groups: list[list[int]] = [list(c) for c in clusters.clusters]
    if config.allow_singletons:
        groups.extend([i] for i in clusters.noise)

    selected: list[tuple[int, CandidatePair]] = []
    for group in groups:
        medoid = select_medoid([embedded[i] for i in group])
        selected.append((len(group), medoid))
    selected.sort(key=lambda t: (-t[0], t[1].extraction_index))

    items: list[ClarificationItem] = []
    seen: set[str] = set()
    for size, pair in selected:
        if pair.interpretation in seen:
            continue  # distinct clusters can still pick the same string
        seen.add(pair.interpretation)
        items.append(ClarificationItem(
            interpretation=pair.interpretation,
            answer=pair.answer,
            passage_id=pair.passage_id,
            cluster_size=size,
        ))
    return ClarificationSet(items=items, source=SetSource.VERDICT, query=query)
