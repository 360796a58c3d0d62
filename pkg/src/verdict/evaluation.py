"""Grounded and legacy (ungrounded) evaluation of clarification sets.

Ungrounded precision/recall match generated interpretations against human
ones by BLEU or an LLM judge; the grounded metrics additionally require
that a cited passage verifiably supports each interpretation. The grounded
gold set is the verified union of human and predicted interpretations, so
fabricating unsupported interpretations is penalized while genuinely
grounded novel ones are rewarded.
"""

from __future__ import annotations

import json
import math
import re
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .gateway import (
    BackendError,
    Gateway,
    GenerationRequest,
    parse_lines,
    parse_yes_no,
    parse_yes_no_list,
)
from .types import ClarificationSet, Corpus, Passage, Universe

DEFAULT_BLEU_TAU = 0.5


# ---------------------------------------------------------------------------
# Gold data

@dataclass(frozen=True)
class GoldInterpretation:
    question: str
    answers: tuple[str, ...]
    passage_id: Optional[str] = None


@dataclass
class GoldSet:
    query: str
    interpretations: list[GoldInterpretation]

    def __post_init__(self) -> None:
        if not self.interpretations:
            raise ValueError(f"gold set for {self.query!r} has no interpretations")

    def questions(self) -> list[str]:
        return [g.question for g in self.interpretations]


def load_gold(path: "str | Path") -> list[GoldSet]:
    """Load a line-delimited gold file: {query, interpretations: [...]}."""
    out: list[GoldSet] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
                out.append(GoldSet(
                    query=record["query"],
                    interpretations=[
                        GoldInterpretation(
                            question=i["q"],
                            answers=tuple(i.get("answers", [])),
                            passage_id=i.get("passage_id"),
                        )
                        for i in record["interpretations"]
                    ],
                ))
            except (KeyError, ValueError, json.JSONDecodeError) as exc:
                raise ValueError(f"gold file line {lineno}: {exc}") from exc
    return out


# ---------------------------------------------------------------------------
# BLEU matching

def _tokens(text: str) -> list[str]:
    return re.findall(r"\w+", text.lower())


def _ngram_counts(tokens: list[str], n: int) -> Counter:
    return Counter(tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1))


def sentence_bleu(hypothesis: str, reference: str) -> float:
    """Sentence BLEU, uniform 1-4 gram weights.

    Unigram precision is unsmoothed (so disjoint strings score 0); higher
    orders use add-one smoothing (so identical strings score exactly 1
    even when they are too short to contain 4-grams).
    """
    hyp = _tokens(hypothesis)
    ref = _tokens(reference)
    if not hyp or not ref:
        return 0.0
    log_sum = 0.0
    for n in range(1, 5):
        hyp_counts = _ngram_counts(hyp, n)
        ref_counts = _ngram_counts(ref, n)
        matches = sum(min(c, ref_counts[g]) for g, c in hyp_counts.items())
        total = max(len(hyp) - n + 1, 0)
        if n == 1:
            if matches == 0:
                return 0.0
            precision = matches / total
        else:
            precision = (matches + 1) / (total + 1)
        log_sum += 0.25 * math.log(precision)
    brevity = 1.0 if len(hyp) >= len(ref) else math.exp(1 - len(ref) / len(hyp))
    return brevity * math.exp(log_sum)


def bleu_match(generated: str, reference: str,
               tau: float = DEFAULT_BLEU_TAU) -> bool:
    if not (0.0 < tau < 1.0):
        raise ValueError("tau must lie in (0, 1)")
    return sentence_bleu(generated, reference) > tau


# ---------------------------------------------------------------------------
# LLM judge

@dataclass(frozen=True)
class JudgeDecision:
    verdict: bool
    prompt_id: str
    fingerprint: str


class Judge:
    """LLM-as-judge wrapper recording every decision for audit.

    Failures and unparseable outputs are conservative: verification says
    No, matching says not-covered.
    """

    def __init__(self, gateway: Gateway):
        self.gateway = gateway
        self.decisions: list[JudgeDecision] = []

    def verify(self, question: str, passage_text: str, tag: str) -> bool:
        prompt = self.gateway.render(
            "I_V", {"question": question, "passage": passage_text}
        )
        request = GenerationRequest(template_id="I_V", rendered_prompt=prompt,
                                    tag=tag, passages_in_context=1)
        try:
            verdict = parse_yes_no(self.gateway.complete(request).text)
        except BackendError as exc:
            self.gateway.ledger.warn(f"verification judge failed ({tag}): {exc}")
            verdict = False
        self.decisions.append(JudgeDecision(verdict, "I_V", tag))
        return verdict

    def match_set(self, query: str, queried: list[str],
                  reference: list[str], tag: str) -> list[bool]:
        """Per-item coverage of `queried` against the `reference` set."""
        if not queried:
            return []
        prompt = self.gateway.render("I_M", {
            "question": query,
            "generated": "\n".join(queried),
            "gold": "\n".join(reference),
        })
        request = GenerationRequest(template_id="I_M", rendered_prompt=prompt,
                                    tag=tag, passages_in_context=0)
        try:
            text = self.gateway.complete(request).text
        except BackendError as exc:
            self.gateway.ledger.warn(f"match judge failed ({tag}): {exc}")
            text = ""
        verdicts, padded = parse_yes_no_list(text, len(queried))
        if padded:
            self.gateway.ledger.warn(f"match judge length mismatch ({tag})")
        for q, v in zip(queried, verdicts):
            self.decisions.append(JudgeDecision(v, "I_M", f"{tag}::{q}"))
        return verdicts


def judge_verify(interpretation: str, passage: Optional[Passage], judge: Judge,
                 fallback: "Universe | None" = None) -> bool:
    """Does a passage support the interpretation's answer?

    With no supporting passage attached, the interpretation is verified
    against each passage of the fallback universe (retrieval proxy for the
    corpus); any single pass suffices.
    """
    if passage is not None:
        return judge.verify(interpretation, passage.text,
                            tag=f"{interpretation}||{passage.id}")
    if fallback is None:
        return False
    return any(
        judge.verify(interpretation, e.passage.text,
                     tag=f"{interpretation}||{e.passage.id}")
        for e in fallback.entries
    )


# ---------------------------------------------------------------------------
# Ungrounded metrics

def ungrounded_metrics(generated: list[str], gold: GoldSet,
                       matcher: str = "bleu",
                       judge: "Judge | None" = None,
                       tau: float = DEFAULT_BLEU_TAU) -> dict:
    """Legacy precision/recall against human interpretations only."""
    if matcher not in ("bleu", "judge"):
        raise ValueError(f"unknown matcher: {matcher}")
    gold_questions = gold.questions()
    degenerate = not generated
    if matcher == "bleu":
        gen_hits = [
            any(bleu_match(g, r, tau) for r in gold_questions)
            for g in generated
        ]
        gold_hits = [
            any(bleu_match(r, g, tau) for g in generated)
            for r in gold_questions
        ]
    else:
        if judge is None:
            raise ValueError("judge matcher requires a Judge")
        gen_hits = judge.match_set(gold.query, generated, gold_questions,
                                   tag=f"{gold.query}||precision")
        gold_hits = (
            judge.match_set(gold.query, gold_questions, generated,
                            tag=f"{gold.query}||recall")
            if generated else [False] * len(gold_questions)
        )
    precision = (sum(gen_hits) / len(gen_hits)) if gen_hits else 0.0
    recall = sum(gold_hits) / len(gold_hits)
    return {
        "precision": precision,
        "recall": recall,
        "precision_degenerate": degenerate,
    }


# ---------------------------------------------------------------------------
# Grounded metrics

def _resolve(passage_id: Optional[str], corpus: Corpus) -> Optional[Passage]:
    if passage_id is not None and passage_id in corpus:
        return corpus.get(passage_id)
    return None


def grounded_precision(predictions: ClarificationSet, judge: Judge,
                       corpus: Corpus,
                       fallback: "Universe | None" = None) -> dict:
    """Share of predicted items whose cited passage verifies them."""
    if not predictions.items:
        return {"value": 0.0, "degenerate": True, "verified": []}
    verified = [
        judge_verify(item.interpretation, _resolve(item.passage_id, corpus),
                     judge, fallback=fallback)
        for item in predictions.items
    ]
    return {
        "value": sum(verified) / len(verified),
        "degenerate": False,
        "verified": verified,
    }


@dataclass
class GroundedGold:
    """Verified interpretations forming the G-Recall denominator."""

    items: list[GoldInterpretation] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.items)

    def questions(self) -> list[str]:
        return [g.question for g in self.items]


def build_grounded_gold(predictions: ClarificationSet, gold: GoldSet,
                        judge: Judge, corpus: Corpus,
                        fallback: "Universe | None" = None,
                        prediction_verified: "list[bool] | None" = None,
                        ) -> GroundedGold:
    """Verified members of (predictions union gold), gold phrasing preferred.

    A verified prediction that the judge matches to a kept gold question
    collapses into it; otherwise it extends the grounded gold set.
    """
    kept: list[GoldInterpretation] = []
    for g in gold.interpretations:
        if judge_verify(g.question, _resolve(g.passage_id, corpus), judge,
                        fallback=fallback):
            kept.append(g)
    if prediction_verified is None:
        prediction_verified = [
            judge_verify(i.interpretation, _resolve(i.passage_id, corpus),
                         judge, fallback=fallback)
            for i in predictions.items
        ]
    for item, ok in zip(predictions.items, prediction_verified):
        if not ok:
            continue
        if kept:
            matches = judge.match_set(
                gold.query, [item.interpretation],
                [k.question for k in kept],
                tag=f"{item.interpretation}||gold-dedup",
            )
            if matches and matches[0]:
                continue
        if any(item.interpretation == k.question for k in kept):
            continue
        kept.append(GoldInterpretation(
            question=item.interpretation,
            answers=(item.answer,),
            passage_id=item.passage_id,
        ))
    return GroundedGold(items=kept)


def grounded_recall(grounded_gold: GroundedGold,
                    predictions: ClarificationSet, judge: Judge,
                    corpus: Corpus,
                    fallback: "Universe | None" = None) -> dict:
    """Share of grounded-gold questions covered by a verifying prediction.

    Covered means: some predicted item matches the gold question (judge
    match) and that item's passage verifies the gold question.
    """
    if len(grounded_gold) == 0:
        return {"value": 1.0, "degenerate": True}
    if not predictions.items:
        return {"value": 0.0, "degenerate": False}
    covered = 0
    generated = predictions.interpretations()
    for g in grounded_gold.items:
        matches = judge.match_set(g.question, generated, [g.question],
                                  tag=f"{g.question}||recall")
        hit = False
        for item, matched in zip(predictions.items, matches):
            if not matched:
                continue
            passage = _resolve(item.passage_id, corpus)
            if passage is not None:
                if judge.verify(g.question, passage.text,
                                tag=f"{g.question}||{passage.id}"):
                    hit = True
                    break
            elif judge_verify(g.question, None, judge, fallback=fallback):
                hit = True
                break
        covered += int(hit)
    return {"value": covered / len(grounded_gold), "degenerate": False}


def g_f1(precision: float, recall: float) -> float:
    """Harmonic mean; 0 when both components are 0."""
    for v in (precision, recall):
        if not (0.0 <= v <= 100.0):
            raise ValueError("rates must be non-negative and bounded")
    if precision + recall == 0:
        return 0.0
    return 2 * precision * recall / (precision + recall)


# ---------------------------------------------------------------------------
# Diversity metrics

def dedup_and_sufficiency(predictions: ClarificationSet, gold: GoldSet,
                          gateway: Gateway) -> dict:
    """Count unique interpretations and compare against the gold count.

    Deduplication goes through the LLM near-duplicate prompt; unparseable
    output falls back to exact-string dedup with a warning. Sufficient
    means at least as many unique interpretations as the deduplicated gold.
    """
    def dedup(questions: list[str], tag: str) -> int:
        if not questions:
            return 0
        prompt = gateway.render("I_D", {
            "question": gold.query,
            "interpretations": "\n".join(questions),
        })
        request = GenerationRequest(template_id="I_D", rendered_prompt=prompt,
                                    tag=tag, passages_in_context=0)
        try:
            lines = parse_lines(gateway.complete(request).text)
        except BackendError as exc:
            gateway.ledger.warn(f"dedup failed ({tag}): {exc}")
            lines = []
        if not lines:
            gateway.ledger.warn(f"dedup output unparseable ({tag}); "
                                "falling back to exact-string dedup")
            return len(set(questions))
        return len(lines)

    if not predictions.items:
        return {"unique_count": 0, "sufficient": False, "gold_unique": None}
    generated = predictions.interpretations()
    unique_count = dedup(generated, tag=f"{gold.query}||pred{len(generated)}")
    gold_unique = dedup(gold.questions(),
                        tag=f"{gold.query}||gold{len(gold.questions())}")
    return {
        "unique_count": unique_count,
        "sufficient": unique_count >= gold_unique,
        "gold_unique": gold_unique,
    }


# ---------------------------------------------------------------------------
# Error quadrants

def error_quadrants(pairs, q: str, judge: Judge, corpus: Corpus) -> dict:
    """2x2 relevance-by-answerability tabulation of candidate pairs.

    Within the relevant-and-answerable cell, additionally judge whether the
    extracted answer is actually supported. Judge failures land in an
    "unknown" bucket rather than skewing the quadrants.
    """
    counts = {
        "relevant_answerable": 0,
        "relevant_unanswerable": 0,
        "irrelevant_answerable": 0,
        "irrelevant_unanswerable": 0,
        "unknown": 0,
    }
    correct = 0
    for pair in pairs:
        passage = _resolve(pair.passage_id, corpus)
        if passage is None:
            counts["unknown"] += 1
            continue
        try:
            relevant = judge.match_set(
                q, [pair.interpretation], [q],
                tag=f"{pair.interpretation}||relevance",
            )[0]
            answerable = judge.verify(
                pair.interpretation, passage.text,
                tag=f"{pair.interpretation}||{passage.id}",
            )
        except BackendError:
            counts["unknown"] += 1
            continue
        key = ("relevant" if relevant else "irrelevant") + "_" + (
            "answerable" if answerable else "unanswerable")
        counts[key] += 1
        if relevant and answerable:
            if judge.verify(
                f"{pair.interpretation}\nAnswer: {pair.answer}", passage.text,
                tag=f"{pair.interpretation}||answer-correct",
            ):
                correct += 1
    top_left = counts["relevant_answerable"]
    counts["answer_correct_rate"] = (correct / top_left) if top_left else 0.0
    return counts


# ---------------------------------------------------------------------------
# Per-query report assembly

def evaluate_query(predictions: ClarificationSet, gold: GoldSet,
                   judge: Judge, corpus: Corpus, gateway: Gateway,
                   fallback: "Universe | None" = None,
                   matcher: str = "judge",
                   tau: float = DEFAULT_BLEU_TAU) -> dict:
    """All per-query metric columns for one clarification set."""
    ungrounded = ungrounded_metrics(
        predictions.interpretations(), gold, matcher=matcher,
        judge=judge if matcher == "judge" else None, tau=tau,
    )
    gp = grounded_precision(predictions, judge, corpus, fallback=fallback)
    grounded_gold = build_grounded_gold(
        predictions, gold, judge, corpus, fallback=fallback,
        prediction_verified=gp["verified"] or None,
    )
    gr = grounded_recall(grounded_gold, predictions, judge, corpus,
                         fallback=fallback)
    diversity = dedup_and_sufficiency(predictions, gold, gateway)
    return {
        "query": gold.query,
        "n_interpretations": len(predictions.items),
        "unique_count": diversity["unique_count"],
        "sufficient": diversity["sufficient"],
        "precision_ungrounded": ungrounded["precision"],
        "recall_ungrounded": ungrounded["recall"],
        "precision_degenerate": ungrounded["precision_degenerate"],
        "g_precision": gp["value"],
        "g_precision_degenerate": gp["degenerate"],
        "g_recall": gr["value"],
        "g_recall_degenerate": gr["degenerate"],
        "g_f1": g_f1(gp["value"], gr["value"]),
        "grounded_gold_size": len(grounded_gold),
    }
