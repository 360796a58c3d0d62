"""Per-run accounting of retriever and LLM calls.

The ledger is what cost-shape comparisons between methods are read from:
how many retriever invocations, how many LLM calls, and how many passages
each call carried in context.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field


@dataclass(frozen=True)
class LlmCallRecord:
    template_id: str
    passages_in_context: int
    tokens_estimate: int
    outcome: str  # "ok", "error", "fallback"
    tag: str = ""


@dataclass
class CostLedger:
    """Append-only within a run; appends are atomic."""

    retriever_calls: int = 0
    llm_calls: list[LlmCallRecord] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    def record_retrieval(self) -> None:
        with self._lock:
            self.retriever_calls += 1

    def record_llm(
        self,
        template_id: str,
        passages_in_context: int,
        tokens_estimate: int,
        outcome: str,
        tag: str = "",
    ) -> None:
        with self._lock:
            self.llm_calls.append(
                LlmCallRecord(
                    template_id=template_id,
                    passages_in_context=passages_in_context,
                    tokens_estimate=tokens_estimate,
                    outcome=outcome,
                    tag=tag,
                )
            )

    def warn(self, message: str) -> None:
        with self._lock:
            self.warnings.append(message)

    def calls_for(self, template_id: str) -> list[LlmCallRecord]:
        return [c for c in self.llm_calls if c.template_id == template_id]

    def to_dict(self) -> dict:
        return {
            "retriever_calls": self.retriever_calls,
            "llm_calls": [
                {
                    "template_id": c.template_id,
                    "passages_in_context": c.passages_in_context,
                    "tokens_estimate": c.tokens_estimate,
                    "outcome": c.outcome,
                    "tag": c.tag,
                }
                for c in self.llm_calls
            ],
            "warnings": list(self.warnings),
        }


def summarize_ledger(ledger: CostLedger) -> dict:
    """Aggregate a ledger into the per-method comparison columns."""
    contexts = [c.passages_in_context for c in ledger.llm_calls]
    return {
        "retriever_calls": ledger.retriever_calls,
        "llm_calls": len(ledger.llm_calls),
        "total_passage_context": sum(contexts),
        "max_context": max(contexts) if contexts else 0,
    }
