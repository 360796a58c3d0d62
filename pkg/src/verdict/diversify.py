"""Verified diversification: per-passage execution feedback.

Each passage of the high-recall universe gets one extraction attempt with a
single-passage context; the generator either produces a grounded
(interpretation, answer) pair or abstains, which prunes unanswerable
passages. Extraction outcomes are independent per passage, so calls may run
concurrently and are re-sorted afterwards.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from typing import Optional

from .gateway import BackendError, Gateway, GenerationRequest, parse_extraction
from .types import CandidatePair, DiversificationResult, Passage, Universe, UniverseKind

DEFAULT_FANOUT = 8


def extract_pair(q: str, passage: Passage, gateway: Gateway,
                 extraction_index: int = 0) -> Optional[CandidatePair]:
    """One extraction attempt for one passage; None on abstention.

    Gateway failures after retries are treated as abstentions so one bad
    passage never poisons the rest of the universe; the failure is recorded
    in the ledger's warnings.
    """
    prompt = gateway.render("I_E", {"question": q, "passage": passage.text})
    request = GenerationRequest(
        template_id="I_E",
        rendered_prompt=prompt,
        tag=passage.id,
        passages_in_context=1,
    )
    try:
        response = gateway.complete(request)
    except BackendError as exc:
        gateway.ledger.warn(f"extraction failed for passage {passage.id}: {exc}")
        return None
    parsed = parse_extraction(response.text)
    if parsed.warning:
        gateway.ledger.warn(
            f"unparseable extraction output for passage {passage.id}"
        )
    if parsed.pair is None:
        return None
    interpretation, answer = parsed.pair
    return CandidatePair(
        interpretation=interpretation,
        answer=answer,
        passage_id=passage.id,
        source_query=q,
        extraction_index=extraction_index,
    )


def diversify(q: str, universe: Universe, gateway: Gateway,
              fanout: int = DEFAULT_FANOUT) -> DiversificationResult:
    """Run extract_pair over every passage of U_q, preserving order.

    The result is invariant to the concurrency schedule: outcomes are
    gathered per extraction index and re-sorted.
    """
    if universe.kind != UniverseKind.U_Q:
        raise ValueError("diversify expects a U_q universe")
    result = DiversificationResult()
    if not universe.entries:
        return result

    warnings_before = len(gateway.ledger.warnings)

    def work(item: tuple[int, Passage]) -> tuple[int, Optional[CandidatePair]]:
        i, passage = item
        return i, extract_pair(q, passage, gateway, extraction_index=i)

    indexed = list(enumerate(e.passage for e in universe.entries))
    if fanout <= 1 or len(indexed) == 1:
        outcomes = [work(item) for item in indexed]
    else:
        with ThreadPoolExecutor(max_workers=fanout) as pool:
            outcomes = list(pool.map(work, indexed))
    outcomes.sort(key=lambda t: t[0])

    for i, pair in outcomes:
        if pair is not None:
            result.pairs.append(pair)
        else:
            result.abstained.append(universe.entries[i].passage.id)
    for message in gateway.ledger.warnings[warnings_before:]:
        result.warnings.append({"message": message})
    return result
