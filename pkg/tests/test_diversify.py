"""Per-passage extraction: partitioning, isolation, and schedule invariance."""

import pytest

from verdict.gateway import BackendError, Gateway, ScriptedBackend, format_extraction
from verdict.ledger import CostLedger
from verdict.types import Corpus, Passage, ScoredPassage, Universe, UniverseKind
from verdict.diversify import diversify, extract_pair


def _universe(passages, kind=UniverseKind.U_Q):
    entries = [
        ScoredPassage(passage=p, score=1.0 - 0.01 * i)
        for i, p in enumerate(passages)
    ]
    return Universe(query="q", entries=entries, k=len(entries) or 1, kind=kind)


def _passages(n):
    return [
        Passage(id=f"p{i:02d}", title=f"t{i}", text=f"distinct body {i}")
        for i in range(n)
    ]


def _gateway(script, ledger=None):
    return Gateway(ScriptedBackend(script), ledger=ledger or CostLedger())


def test_extract_pair_scripted():
    gateway = _gateway({"I_E": {
        "p00": format_extraction("What is HP, the company?",
                                 "Hewlett-Packard, a technology company"),
    }})
    pair = extract_pair("What is HP", _passages(1)[0], gateway,
                        extraction_index=4)
    assert pair.interpretation == "What is HP, the company?"
    assert pair.passage_id == "p00"
    assert pair.source_query == "What is HP"
    assert pair.extraction_index == 4


def test_extract_pair_abstention():
    gateway = _gateway({"I_E": {"*": "null"}})
    assert extract_pair("q", _passages(1)[0], gateway) is None


def test_extract_pair_gateway_failure_is_abstention_with_warning():
    class Dead:
        backend_id = "dead"

        def generate(self, template_id, prompt, tag):
            raise BackendError("down")

    ledger = CostLedger()
    gateway = Gateway(Dead(), ledger=ledger)
    assert extract_pair("q", _passages(1)[0], gateway) is None
    assert any("extraction failed" in w for w in ledger.warnings)


def test_extract_pair_unparseable_output_warns():
    ledger = CostLedger()
    gateway = _gateway({"I_E": {"*": "no labels here"}}, ledger)
    assert extract_pair("q", _passages(1)[0], gateway) is None
    assert any("unparseable" in w for w in ledger.warnings)


def _mixed_script(n, answerable):
    script = {"I_E": {"*": "null"}}
    for i in answerable:
        script["I_E"][f"p{i:02d}"] = format_extraction(
            f"interp {i}", f"answer {i}"
        )
    return script


def test_diversify_partitions_pairs_and_abstained():
    passages = _passages(20)
    answerable = {0, 2, 3, 5, 8, 9, 11, 12, 14, 15, 17, 19}
    gateway = _gateway(_mixed_script(20, answerable))
    result = diversify("q", _universe(passages), gateway, fanout=4)
    assert len(result.pairs) == 12
    assert len(result.abstained) == 8
    assert len(result.pairs) + len(result.abstained) == 20
    assert {p.passage_id for p in result.pairs} == {
        f"p{i:02d}" for i in answerable
    }
    assert set(result.abstained) == {
        f"p{i:02d}" for i in range(20) if i not in answerable
    }


def test_diversify_pairs_ordered_by_extraction_index():
    gateway = _gateway(_mixed_script(15, set(range(15))))
    result = diversify("q", _universe(_passages(15)), gateway, fanout=8)
    indices = [p.extraction_index for p in result.pairs]
    assert indices == sorted(indices) == list(range(15))


def test_diversify_schedule_invariance():
    passages = _passages(16)
    script = _mixed_script(16, {1, 3, 4, 7, 10, 13})

    def run(fanout):
        result = diversify("q", _universe(passages), _gateway(script),
                           fanout=fanout)
        return ([p.to_dict() for p in result.pairs], result.abstained)

    assert run(1) == run(2) == run(8)


def test_diversify_context_isolation():
    passages = _passages(10)
    backend = ScriptedBackend(_mixed_script(10, {0, 5}))
    gateway = Gateway(backend, ledger=CostLedger())
    diversify("q", _universe(passages), gateway, fanout=1)
    texts = {p.id: p.text for p in passages}
    for template_id, tag, prompt in backend.calls:
        assert template_id == "I_E"
        assert texts[tag] in prompt
        for other_id, other_text in texts.items():
            if other_id != tag:
                assert other_text not in prompt


def test_diversify_ledger_single_passage_contexts():
    ledger = CostLedger()
    gateway = _gateway(_mixed_script(20, {0, 1}), ledger)
    diversify("q", _universe(_passages(20)), gateway, fanout=1)
    extraction_calls = ledger.calls_for("I_E")
    assert len(extraction_calls) == 20
    assert all(c.passages_in_context == 1 for c in extraction_calls)


def test_diversify_empty_universe():
    result = diversify("q", _universe([]), _gateway({}))
    assert result.pairs == [] and result.abstained == []


def test_diversify_rejects_non_uq_universe():
    with pytest.raises(ValueError):
        diversify("q", _universe(_passages(2), kind=UniverseKind.U_PSEUDO),
                  _gateway({}))


def test_diversify_pair_passages_belong_to_universe():
    passages = _passages(12)
    gateway = _gateway(_mixed_script(12, {2, 4, 6}))
    universe = _universe(passages)
    result = diversify("q", universe, gateway, fanout=3)
    ids = set(universe.passage_ids())
    assert all(p.passage_id in ids for p in result.pairs)


def test_diversify_isolates_per_passage_failures():
    class FailOnP03:
        backend_id = "partial"

        def generate(self, template_id, prompt, tag):
            if tag == "p03":
                raise BackendError("transport")
            return format_extraction(f"interp {tag}", f"answer {tag}")

    ledger = CostLedger()
    gateway = Gateway(FailOnP03(), ledger=ledger)
    result = diversify("q", _universe(_passages(6)), gateway, fanout=1)
    assert len(result.pairs) == 5
    assert result.abstained == ["p03"]
    assert any("p03" in w["message"] for w in result.warnings)
