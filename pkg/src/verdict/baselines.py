"""Reference baselines: Diversify-then-Verify (DtV) and retrieval-augmented
clarification (RAC).

DtV generates pseudo-interpretations from parametric knowledge alone, then
retrieves per interpretation, verifies the pooled universe post hoc with a
(configurably strong) verifier, and answers everything in one long-context
call. RAC skips per-interpretation retrieval and runs a single long-context
generation over the same universe the main pipeline uses. Both emit the
same ClarificationSet shape so the evaluator is method-agnostic.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .gateway import (
    BackendError,
    Gateway,
    GenerationRequest,
    parse_lines,
    parse_yes_no_list,
)
from .retrieval import RerankProvider, VectorIndex, retrieve_topk
from .types import (
    ClarificationItem,
    ClarificationSet,
    ScoredPassage,
    SetSource,
    Universe,
    UniverseKind,
)


@dataclass
class BaselineConfig:
    per_interpretation_k: int = 5
    final_k: int = 5
    verifier_backend: str = "default"

    def __post_init__(self) -> None:
        if self.per_interpretation_k < 1 or self.final_k < 1:
            raise ValueError("baseline depths must be positive")


@dataclass
class PseudoInterpretationSet:
    items: list[str]
    source_query: str

    def __len__(self) -> int:
        return len(self.items)


def dtv_pseudo_interpret(q: str, gateway: Gateway) -> PseudoInterpretationSet:
    """One retrieval-free LLM call producing a line-delimited list."""
    if not q:
        raise ValueError("query must be non-empty")
    prompt = gateway.render("I_P", {"question": q})
    request = GenerationRequest(template_id="I_P", rendered_prompt=prompt,
                                tag=q, passages_in_context=0)
    try:
        response = gateway.complete(request)
    except BackendError as exc:
        gateway.ledger.warn(f"pseudo-interpretation failed: {exc}")
        return PseudoInterpretationSet(items=[], source_query=q)
    items = parse_lines(response.text)
    if not items:
        gateway.ledger.warn("pseudo-interpretation produced an empty set")
    return PseudoInterpretationSet(items=items, source_query=q)


def dtv_build_universe(pseudo: PseudoInterpretationSet, config: BaselineConfig,
                       index: VectorIndex, gateway: Gateway) -> Universe:
    """Union of per-interpretation top-k retrievals, max score on overlap."""
    best: dict[str, ScoredPassage] = {}
    for interpretation in pseudo.items:
        hits = retrieve_topk(interpretation, index, config.per_interpretation_k,
                             ledger=gateway.ledger, kind=UniverseKind.U_PSEUDO)
        for entry in hits.entries:
            prior = best.get(entry.passage.id)
            if prior is None or entry.score > prior.score:
                best[entry.passage.id] = entry
    entries = sorted(
        best.values(),
        key=lambda e: (-e.score, index.corpus.index_of(e.passage.id)),
    )
    k = max(len(pseudo.items) * config.per_interpretation_k, 1)
    return Universe(query=pseudo.source_query, entries=entries, k=k,
                    kind=UniverseKind.U_PSEUDO)


def _format_passage_list(entries: list[ScoredPassage]) -> str:
    return "\n".join(
        f"[{e.passage.id}] {e.passage.title}: {e.passage.text}"
        for e in entries
    )


def dtv_verify(pseudo: PseudoInterpretationSet, universe: Universe,
               gateway: Gateway, config: BaselineConfig) -> Universe:
    """Keep passages some pseudo-interpretation verifies.

    One batched judge call per interpretation, each carrying the whole
    universe in context and answering Yes/No per passage in order. A failed
    batch verifies nothing and is only a warning.
    """
    if not universe.entries:
        return Universe(query=universe.query, entries=[], k=universe.k,
                        kind=UniverseKind.U_VERIFIED)
    keep = [False] * len(universe.entries)
    passage_block = _format_passage_list(universe.entries)
    for interpretation in pseudo.items:
        prompt = gateway.render(
            "I_V", {"question": interpretation, "passage": passage_block}
        )
        request = GenerationRequest(
            template_id="I_V", rendered_prompt=prompt, tag=interpretation,
            passages_in_context=len(universe.entries),
        )
        try:
            response = gateway.complete(request)
        except BackendError as exc:
            gateway.ledger.warn(
                f"verification batch failed for {interpretation!r}: {exc}"
            )
            continue
        verdicts, padded = parse_yes_no_list(response.text,
                                             len(universe.entries))
        if padded:
            gateway.ledger.warn(
                f"verification output length mismatch for {interpretation!r}"
            )
        keep = [a or b for a, b in zip(keep, verdicts)]
    entries = [e for e, kept in zip(universe.entries, keep) if kept]
    return Universe(query=universe.query, entries=entries, k=universe.k,
                    kind=UniverseKind.U_VERIFIED)


_ITEM_LABEL_RE = re.compile(
    r"^[\s#*\->]*(interpretation|answer|passage)\b[\s*]*:\s*(.*)$",
    re.IGNORECASE,
)


def parse_generation_items(text: str) -> list[tuple[str, str, list[str]]]:
    """Parse repeated Interpretation/Answer/Passage blocks.

    Returns (interpretation, answer, cited passage ids) tuples; blocks
    missing either the interpretation or the answer are dropped.
    """
    items: list[tuple[str, str, list[str]]] = []
    current: dict[str, str] = {}

    def flush() -> None:
        interp = current.get("interpretation", "").strip()
        answer = current.get("answer", "").strip()
        cited = re.findall(r"[\w.\-]+", current.get("passage", ""))
        if interp and answer:
            items.append((interp, answer, cited))
        current.clear()

    for line in text.splitlines():
        m = _ITEM_LABEL_RE.match(line)
        if not m:
            continue
        label = m.group(1).lower()
        if label == "interpretation" and "interpretation" in current:
            flush()
        current[label] = m.group(2).strip().strip("*").strip()
    flush()
    return items


def _generate_items(q: str, universe: Universe, gateway: Gateway,
                    source: SetSource) -> ClarificationSet:
    """Shared long-context generation step for DtV answering and RAC."""
    if not universe.entries:
        return ClarificationSet(items=[], source=source, query=q)
    prompt = gateway.render(
        "I_G", {"question": q, "passages": _format_passage_list(universe.entries)}
    )
    request = GenerationRequest(
        template_id="I_G", rendered_prompt=prompt, tag=q,
        passages_in_context=len(universe.entries),
    )
    try:
        response = gateway.complete(request)
    except BackendError as exc:
        gateway.ledger.warn(f"answer generation failed: {exc}")
        return ClarificationSet(items=[], source=source, query=q)
    parsed = parse_generation_items(response.text)
    if not parsed:
        gateway.ledger.warn("answer generation output was unparseable")
    score_of = {e.passage.id: e.score for e in universe.entries}
    items: list[ClarificationItem] = []
    seen: set[str] = set()
    for interp, answer, cited in parsed:
        if interp in seen:
            continue
        seen.add(interp)
        resolvable = [c for c in cited if c in score_of]
        passage_id = max(resolvable, key=lambda c: score_of[c]) if resolvable else None
        items.append(ClarificationItem(
            interpretation=interp, answer=answer, passage_id=passage_id,
        ))
    return ClarificationSet(items=items, source=source, query=q)


def dtv_answer(q: str, verified: Universe, gateway: Gateway,
               source: SetSource = SetSource.DTV) -> ClarificationSet:
    """Single long-context generation over the verified universe."""
    return _generate_items(q, verified, gateway, source)


def dtv_pipeline(q: str, config: BaselineConfig, index: VectorIndex,
                 gateway: Gateway, verifier_gateway: "Gateway | None" = None,
                 mode: str = "full",
                 rerank_provider: "RerankProvider | None" = None,
                 ) -> ClarificationSet:
    """End-to-end DtV; mode "no_verification" skips the verify phase.

    After verification (or union, when skipped) the universe is pruned to
    the top final_k passages before answer generation.
    """
    if mode not in ("full", "no_verification"):
        raise ValueError(f"unknown DtV mode: {mode}")
    source = SetSource.DTV if mode == "full" else SetSource.DTV_NOVERIFY
    pseudo = dtv_pseudo_interpret(q, gateway)
    universe = dtv_build_universe(pseudo, config, index, gateway)
    if mode == "full":
        universe = dtv_verify(pseudo, universe, verifier_gateway or gateway,
                              config)
    entries = universe.entries
    if rerank_provider is not None:
        order = {e.passage.id: i for i, e in enumerate(entries)}
        entries = sorted(
            entries,
            key=lambda e: (-rerank_provider.score(q, e.passage),
                           order[e.passage.id]),
        )
    pruned = Universe(query=universe.query,
                      entries=entries[:config.final_k],
                      k=config.final_k, kind=universe.kind)
    return dtv_answer(q, pruned, gateway, source=source)


def rac(q: str, universe: Universe, gateway: Gateway) -> ClarificationSet:
    """One long-context generation over the whole U_q."""
    if universe.kind != UniverseKind.U_Q:
        raise ValueError("RAC consumes the single-retrieval universe U_q")
    return _generate_items(q, universe, gateway, SetSource.RAC)
