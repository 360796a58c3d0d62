"""DtV, DtV without verification, and RAC baselines."""

import json

import pytest

from verdict.baselines import (
    BaselineConfig,
    PseudoInterpretationSet,
    dtv_answer,
    dtv_build_universe,
    dtv_pipeline,
    dtv_pseudo_interpret,
    dtv_verify,
    parse_generation_items,
    rac,
)
from verdict.embedding import HashEmbeddingProvider
from verdict.gateway import Gateway, ScriptedBackend
from verdict.ledger import CostLedger
from verdict.retrieval import RetrievalConfig, VectorIndex, build_universe, ingest, retrieve_topk
from verdict.types import SetSource, Universe, UniverseKind

from conftest import FIXTURES, make_corpus, scripted_gateway


@pytest.fixture(scope="module")
def hp_index():
    corpus = ingest(FIXTURES / "hp_corpus.jsonl")
    return VectorIndex(corpus, HashEmbeddingProvider(dim=64))


def _hp_gateway(ledger=None):
    backend = ScriptedBackend.from_file(FIXTURES / "hp_script.json")
    return Gateway(backend, ledger=ledger or CostLedger())


# ---------------------------------------------------------------------------
# pseudo-interpretation

def test_pseudo_interpret_scripted():
    ledger = CostLedger()
    pseudo = dtv_pseudo_interpret("What is HP", _hp_gateway(ledger))
    assert pseudo.items == [
        "What is HP the company?",
        "What is HP as horsepower?",
        "What is HP in Harry Potter?",
    ]
    calls = ledger.calls_for("I_P")
    assert len(calls) == 1
    assert calls[0].passages_in_context == 0


def test_pseudo_interpret_empty_output_warns():
    ledger = CostLedger()
    gateway = scripted_gateway({"I_P": {"*": "   "}}, ledger)
    pseudo = dtv_pseudo_interpret("q", gateway)
    assert pseudo.items == []
    assert any("empty" in w for w in ledger.warnings)


# ---------------------------------------------------------------------------
# pseudo universe

def test_build_universe_disjoint_is_plain_union(hp_index):
    # "topic" queries over a synthetic corpus large enough that per-query
    # results can overlap; the oracle is an explicit set union
    provider = HashEmbeddingProvider(dim=32)
    index = VectorIndex(make_corpus(60), provider)
    pseudo = PseudoInterpretationSet(
        items=["topic 1 details", "topic 2 details", "topic 5 details"],
        source_query="topics",
    )
    config = BaselineConfig(per_interpretation_k=5)
    ledger = CostLedger()
    gateway = scripted_gateway({}, ledger)
    universe = dtv_build_universe(pseudo, config, index, gateway)

    expected_ids = set()
    best = {}
    for q in pseudo.items:
        for e in retrieve_topk(q, index, 5).entries:
            expected_ids.add(e.passage.id)
            best[e.passage.id] = max(best.get(e.passage.id, -2.0), e.score)
    assert set(universe.passage_ids()) == expected_ids
    assert len(universe.passage_ids()) == len(set(universe.passage_ids()))
    for e in universe.entries:
        assert e.score == pytest.approx(best[e.passage.id])
    assert universe.kind == UniverseKind.U_PSEUDO
    assert ledger.retriever_calls == 3
    universe.validate()


def test_build_universe_empty_pseudo_set(hp_index):
    universe = dtv_build_universe(
        PseudoInterpretationSet(items=[], source_query="q"),
        BaselineConfig(), hp_index, _hp_gateway(),
    )
    assert len(universe) == 0


def test_build_universe_sorted_by_score(hp_index):
    pseudo = PseudoInterpretationSet(
        items=["Hewlett Packard company", "horsepower unit"],
        source_query="What is HP",
    )
    universe = dtv_build_universe(pseudo, BaselineConfig(), hp_index,
                                  _hp_gateway())
    universe.validate()


# ---------------------------------------------------------------------------
# verification

def test_verify_keeps_only_accepted_passages(hp_index):
    pseudo = PseudoInterpretationSet(
        items=["What is HP the company?", "What is HP in Harry Potter?"],
        source_query="What is HP",
    )
    universe = dtv_build_universe(pseudo, BaselineConfig(), hp_index,
                                  _hp_gateway())
    n = len(universe)
    script = {"I_V": {
        # the company interpretation verifies the first three passages,
        # the Harry Potter one verifies nothing
        "What is HP the company?": "\n".join(
            ["Yes", "Yes", "Yes"] + ["No"] * (n - 3)),
        "What is HP in Harry Potter?": "\n".join(["No"] * n),
    }}
    ledger = CostLedger()
    verified = dtv_verify(pseudo, universe, scripted_gateway(script, ledger),
                          BaselineConfig())
    assert verified.kind == UniverseKind.U_VERIFIED
    assert verified.passage_ids() == universe.passage_ids()[:3]
    calls = ledger.calls_for("I_V")
    assert len(calls) == 2
    assert all(c.passages_in_context == n for c in calls)


def test_verify_accept_all_is_identity(hp_index):
    pseudo = PseudoInterpretationSet(items=["anything"], source_query="q")
    universe = dtv_build_universe(pseudo, BaselineConfig(), hp_index,
                                  _hp_gateway())
    n = len(universe)
    gateway = scripted_gateway({"I_V": {"*": "\n".join(["Yes"] * n)}})
    verified = dtv_verify(pseudo, universe, gateway, BaselineConfig())
    assert verified.passage_ids() == universe.passage_ids()


def test_verify_failed_batch_verifies_nothing(hp_index):
    pseudo = PseudoInterpretationSet(items=["only one"], source_query="q")
    universe = dtv_build_universe(pseudo, BaselineConfig(), hp_index,
                                  _hp_gateway())
    ledger = CostLedger()
    gateway = scripted_gateway({"I_V": {}}, ledger)  # no key -> hard failure
    verified = dtv_verify(pseudo, universe, gateway, BaselineConfig())
    assert len(verified) == 0
    assert any("verification batch failed" in w for w in ledger.warnings)


def test_verify_length_mismatch_pads_and_warns(hp_index):
    pseudo = PseudoInterpretationSet(items=["short output"], source_query="q")
    universe = dtv_build_universe(pseudo, BaselineConfig(), hp_index,
                                  _hp_gateway())
    ledger = CostLedger()
    gateway = scripted_gateway({"I_V": {"*": "Yes"}}, ledger)
    verified = dtv_verify(pseudo, universe, gateway, BaselineConfig())
    assert verified.passage_ids() == universe.passage_ids()[:1]
    assert any("length mismatch" in w for w in ledger.warnings)


# ---------------------------------------------------------------------------
# generation parsing and answering

def test_parse_generation_items_blocks():
    text = (
        "Interpretation: first q\nAnswer: first a\nPassage: p1\n"
        "Interpretation: second q\nAnswer: second a\nPassage: p2, p3\n"
        "Interpretation: dropped (no answer)\n"
    )
    items = parse_generation_items(text)
    assert items == [
        ("first q", "first a", ["p1"]),
        ("second q", "second a", ["p2", "p3"]),
    ]


def test_parse_generation_items_garbage():
    assert parse_generation_items("nothing structured here") == []


def test_dtv_answer_scripted(hp_index):
    universe = retrieve_topk("Hewlett Packard horsepower", hp_index, 5,
                             kind=UniverseKind.U_VERIFIED)
    ids = universe.passage_ids()
    script = {"I_G": {"*": (
        f"Interpretation: q one\nAnswer: a one\nPassage: {ids[0]}\n"
        f"Interpretation: q two\nAnswer: a two\nPassage: {ids[1]}"
    )}}
    ledger = CostLedger()
    cset = dtv_answer("q", universe, scripted_gateway(script, ledger))
    assert len(cset.items) == 2
    assert cset.items[0].passage_id == ids[0]
    calls = ledger.calls_for("I_G")
    assert len(calls) == 1 and calls[0].passages_in_context == 5


def test_dtv_answer_empty_universe():
    empty = Universe(query="q", entries=[], k=5, kind=UniverseKind.U_VERIFIED)
    cset = dtv_answer("q", empty, scripted_gateway({}))
    assert len(cset.items) == 0


def test_dtv_answer_unresolvable_citation_is_absent(hp_index):
    universe = retrieve_topk("anything", hp_index, 3,
                             kind=UniverseKind.U_VERIFIED)
    script = {"I_G": {"*": "Interpretation: q\nAnswer: a\nPassage: nowhere"}}
    cset = dtv_answer("q", universe, scripted_gateway(script))
    assert cset.items[0].passage_id is None


def test_dtv_answer_cites_highest_scored_resolvable(hp_index):
    universe = retrieve_topk("anything", hp_index, 4,
                             kind=UniverseKind.U_VERIFIED)
    ids = universe.passage_ids()
    script = {"I_G": {"*": (
        f"Interpretation: q\nAnswer: a\nPassage: {ids[3]}, {ids[1]}, bogus"
    )}}
    cset = dtv_answer("q", universe, scripted_gateway(script))
    assert cset.items[0].passage_id == ids[1]


# ---------------------------------------------------------------------------
# end-to-end pipelines on the HP fixture

def test_dtv_pipeline_full_cost_shape(hp_index):
    ledger = CostLedger()
    gateway = _hp_gateway(ledger)
    cset = dtv_pipeline("What is HP", BaselineConfig(), hp_index, gateway,
                        mode="full")
    assert cset.source == SetSource.DTV
    # Q-hat has 3 pseudo-interpretations: 3 retriever calls, 3 batched
    # verify calls each over the whole pooled universe, 1 generation call
    assert ledger.retriever_calls == 3
    assert len(ledger.calls_for("I_P")) == 1
    verify_calls = ledger.calls_for("I_V")
    assert len(verify_calls) == 3
    contexts = {c.passages_in_context for c in verify_calls}
    assert len(contexts) == 1  # every batch carries the full universe
    assert len(ledger.calls_for("I_G")) == 1


def test_dtv_pipeline_noverify_skips_verification(hp_index):
    ledger = CostLedger()
    gateway = _hp_gateway(ledger)
    cset = dtv_pipeline("What is HP", BaselineConfig(), hp_index, gateway,
                        mode="no_verification")
    assert cset.source == SetSource.DTV_NOVERIFY
    assert ledger.retriever_calls == 3
    assert len(ledger.calls_for("I_V")) == 0
    assert len(ledger.calls_for("I_G")) == 1
    # the parametric Harry Potter interpretation survives without
    # verification and cites nothing in the corpus
    by_interp = {i.interpretation: i for i in cset.items}
    assert "What is HP in Harry Potter?" in by_interp
    assert by_interp["What is HP in Harry Potter?"].passage_id is None


def test_dtv_pipeline_full_subset_of_noverify(hp_index):
    full = dtv_pipeline("What is HP", BaselineConfig(), hp_index,
                        _hp_gateway(), mode="full")
    loose = dtv_pipeline("What is HP", BaselineConfig(), hp_index,
                         _hp_gateway(), mode="no_verification")
    assert set(full.interpretations()) <= set(loose.interpretations())


def test_dtv_pipeline_prunes_to_final_k(hp_index):
    ledger = CostLedger()
    cset = dtv_pipeline("What is HP", BaselineConfig(final_k=2), hp_index,
                        _hp_gateway(ledger), mode="no_verification")
    generation = ledger.calls_for("I_G")
    assert generation[0].passages_in_context == 2


def test_dtv_pipeline_rejects_unknown_mode(hp_index):
    with pytest.raises(ValueError):
        dtv_pipeline("q", BaselineConfig(), hp_index, _hp_gateway(),
                     mode="half")


def test_rac_cost_shape(hp_index):
    ledger = CostLedger()
    gateway = _hp_gateway(ledger)
    universe = build_universe("What is HP",
                              RetrievalConfig(k_first=30, k_final=20),
                              gateway, hp_index)
    cset = rac("What is HP", universe, gateway)
    assert cset.source == SetSource.RAC
    assert ledger.retriever_calls == 1
    generation = ledger.calls_for("I_G")
    assert len(generation) == 1
    assert generation[0].passages_in_context == len(universe)


def test_rac_rejects_wrong_universe_kind(hp_index):
    universe = retrieve_topk("q", hp_index, 5, kind=UniverseKind.U_PSEUDO)
    with pytest.raises(ValueError):
        rac("q", universe, _hp_gateway())


def test_rac_empty_universe():
    empty = Universe(query="q", entries=[], k=20, kind=UniverseKind.U_Q)
    cset = rac("q", empty, _hp_gateway())
    assert len(cset.items) == 0


def test_baseline_config_validation():
    with pytest.raises(ValueError):
        BaselineConfig(per_interpretation_k=0)
