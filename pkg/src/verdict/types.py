"""Core domain types shared across the pipeline.

A Corpus is an ordered collection of Passages; retrieval produces a Universe
of scored passages; diversification turns a Universe into CandidatePairs;
consolidation reduces those to a ClarificationSet shown to users or scored
by the evaluator.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterator, Optional


class UniverseKind(str, Enum):
    U_Q = "U_q"            # single relaxed-query retrieval
    U_PSEUDO = "U_pseudo"  # union of per-pseudo-interpretation retrievals
    U_VERIFIED = "U_verified"  # verified subset of U_pseudo


class SetSource(str, Enum):
    VERDICT = "verdict"
    DTV = "dtv"
    DTV_NOVERIFY = "dtv_noverify"
    RAC = "rac"
    HUMAN = "human"


@dataclass(frozen=True)
class Passage:
    id: str
    title: str
    text: str

    def __post_init__(self) -> None:
        if not self.text:
            raise ValueError(f"passage {self.id!r} has empty text")


class Corpus:
    """Ordered, duplicate-free collection of passages.

    Iteration order is ingestion order; ingestion index doubles as the
    deterministic tie-break key in retrieval.
    """

    def __init__(self, passages: list[Passage], name: str = "corpus"):
        self.name = name
        self.passages: list[Passage] = []
        self._by_id: dict[str, int] = {}
        for p in passages:
            self.add(p)

    def add(self, passage: Passage) -> None:
        if passage.id in self._by_id:
            raise ValueError(f"duplicate passage id: {passage.id!r}")
        self._by_id[passage.id] = len(self.passages)
        self.passages.append(passage)

    def __len__(self) -> int:
        return len(self.passages)

    def __iter__(self) -> Iterator[Passage]:
        return iter(self.passages)

    def __contains__(self, passage_id: str) -> bool:
        return passage_id in self._by_id

    def get(self, passage_id: str) -> Passage:
        return self.passages[self._by_id[passage_id]]

    def index_of(self, passage_id: str) -> int:
        return self._by_id[passage_id]


@dataclass(frozen=True)
class ScoredPassage:
    passage: Passage
    score: float


@dataclass
class Universe:
    """Ordered retrieval result; entries sorted non-increasing by score."""

    query: str
    entries: list[ScoredPassage]
    k: int
    kind: UniverseKind

    def __len__(self) -> int:
        return len(self.entries)

    def passage_ids(self) -> list[str]:
        return [e.passage.id for e in self.entries]

    def validate(self) -> None:
        scores = [e.score for e in self.entries]
        if any(a < b for a, b in zip(scores, scores[1:])):
            raise ValueError("universe entries not sorted by score")
        ids = self.passage_ids()
        if len(set(ids)) != len(ids):
            raise ValueError("universe contains duplicate passage ids")
        if len(self.entries) > self.k:
            raise ValueError("universe larger than retrieval depth k")

    def to_dict(self) -> dict:
        return {
            "query": self.query,
            "k": self.k,
            "kind": self.kind.value,
            "entries": [
                {"id": e.passage.id, "score": e.score} for e in self.entries
            ],
        }


@dataclass(frozen=True)
class CandidatePair:
    """One (interpretation, answer, supporting passage) triple."""

    interpretation: str
    answer: str
    passage_id: str
    source_query: str
    extraction_index: int

    def __post_init__(self) -> None:
        if not self.interpretation or not self.answer or not self.passage_id:
            raise ValueError("candidate pair fields must be non-empty")

    def to_dict(self) -> dict:
        return {
            "interpretation": self.interpretation,
            "answer": self.answer,
            "passage_id": self.passage_id,
            "source_query": self.source_query,
            "extraction_index": self.extraction_index,
        }


@dataclass
class DiversificationResult:
    """Per-passage extraction outcome over a Universe.

    pairs and abstained partition the processed passages: at most one pair
    per passage, everything else abstained.
    """

    pairs: list[CandidatePair] = field(default_factory=list)
    abstained: list[str] = field(default_factory=list)
    warnings: list[dict] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "pairs": [p.to_dict() for p in self.pairs],
            "abstained": list(self.abstained),
            "warnings": list(self.warnings),
        }


@dataclass(frozen=True)
class ClarificationItem:
    interpretation: str
    answer: str
    passage_id: Optional[str]
    cluster_size: int = 1

    def to_dict(self) -> dict:
        return {
            "interpretation": self.interpretation,
            "answer": self.answer,
            "passage_id": self.passage_id,
            "cluster_size": self.cluster_size,
        }


@dataclass
class ClarificationSet:
    """Final deduplicated (interpretation, answer, passage) items."""

    items: list[ClarificationItem]
    source: SetSource
    query: str = ""

    def __post_init__(self) -> None:
        seen = set()
        for item in self.items:
            if item.interpretation in seen:
                raise ValueError(
                    f"duplicate interpretation in clarification set: "
                    f"{item.interpretation!r}"
                )
            seen.add(item.interpretation)

    def __len__(self) -> int:
        return len(self.items)

    def interpretations(self) -> list[str]:
        return [i.interpretation for i in self.items]

    def to_dict(self) -> dict:
        return {
            "query": self.query,
            "source": self.source.value,
            "items": [i.to_dict() for i in self.items],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "ClarificationSet":
        return cls(
            items=[
                ClarificationItem(
                    interpretation=i["interpretation"],
                    answer=i["answer"],
                    passage_id=i.get("passage_id"),
                    cluster_size=i.get("cluster_size", 1),
                )
                for i in d["items"]
            ],
            source=SetSource(d["source"]),
            query=d.get("query", ""),
        )
