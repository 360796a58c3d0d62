"""Uniform interface to text-generation backends.

Renders prompt templates, issues completions with bounded retries, records
every attempt in the cost ledger, and parses the structured outputs the
pipeline relies on. A scripted backend makes the whole system a pure
function of its inputs for tests and fixtures; an HTTP backend talks to a
real model endpoint.
"""

from __future__ import annotations

import json
import os
import re
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Protocol

from .ledger import CostLedger

# Template identifiers. I_P and I_G ship as reconstructions (the original
# instruction wordings live in third-party work); override from disk where
# exact reproduction matters.
TEMPLATE_IDS = ("I_P", "I_R", "I_E", "I_G", "I_M", "I_V", "I_D")

DEFAULT_TEMPLATES: dict[str, str] = {
    # Single-passage interpretation/answer extraction with abstention.
    "I_E": """Given an ambiguous query and one of the passages from retrieval results, provide a disambiguated query which can be answered by the passage.
Try to infer the user's intent with the ambiguous query and think of possible concrete, non-ambiguous rewritten questions.
If you cannot find any of them, which can be answered by the provided document, simply abstain by replying with 'null'.
You should provide at most one subquestion, the most relevant one you can think of.

Here are the rules to follow when generating the question and answer:
1. The generated question must be a disambiguation of the original ambiguous query.
2. The question should be fully answerable from information present in given passage. Even if the passage is relevant to the original ambiguous query, if it is not self-contained, abstain by responding with 'null'.
3. Make sure the question is clear and unambiguous, while clarifying the intent of the original ambiguous question.
4. Phrases like 'based on the provided context', 'according to the passage', etc., are not allowed to appear in the question. Similarly, questions such as "What is not mentioned about something in the passage?" are not acceptable.
5. When addressing questions tied to a specific moment, provide the clearest possible time reference. Avoid ambiguous questions such as "Which country has won the most recent World Cup?" since the answer varies depending on when the question is asked.
6. The answer must be specifically based on the information provided in the passage. Your prior knowledge should not intervene in answering the identified clarification question.

Input fields are:
Question: {question}
Passage: {passage}

Output fields are:
Interpretation: <generated interpretation>
Answer: <generated answer>""",
    # Set-level match judgement for ungrounded precision/recall.
    "I_M": """Given a list of generated disambiguated subquestions that clarify the intent of an ambiguous question, compare them with the list of predefined subquestions and determine how many have been successfully identified. You should return a binary label, Yes or No, for each subquestion indicating whether it was covered or not.

Input fields are:
Question: {question}
Generated Disambiguations: {generated}
Ground-truth Disambiguations: {gold}

Output fields are:
Decisions: <one Yes or No per line, one line per generated disambiguation>""",
    # Passage-support verification judgement.
    "I_V": """Given a question, an answer and an associated passage, decide if the passage can support the answer, providing enough evidence to reach the answer given the question.
Your answer should be either Yes or No.

Input fields are:
Question: {question}
Passage: {passage}

Output fields are:
Decision: <Yes or No>""",
    # Near-duplicate removal over a list of interpretations.
    "I_D": """Given a list of subquestions, which are derived disambiguations of an ambiguous query, remove nearly identical duplicates and leave only distinct ones.
You should provide a list of the remaining subquestions, one at a line.

Input fields are:
Ambiguous Question: {question}
List of Disambiguated Subquestions: {interpretations}

Output fields are:
List of Unique Subquestions: <remaining subquestions, one per line>""",
    # Query relaxation for high-recall retrieval.
    "I_R": """Rewrite the ambiguous question below into a single broader search query that covers every plausible meaning of the question. Keep it short, drop restrictive qualifiers, and add disambiguating keywords for the different senses. Reply with the rewritten query only.

Question: {question}""",
    # RECONSTRUCTION: pseudo-interpretation generation from parametric
    # knowledge only. Override from a template directory for fidelity.
    "I_P": """The question below is ambiguous: it admits several distinct interpretations. Using only your own knowledge (no external documents), list each distinct, concrete interpretation of the question, one per line. Do not answer them.

Question: {question}""",
    # RECONSTRUCTION: long-context joint interpretation + answer generation.
    "I_G": """The question below is ambiguous. Using the numbered passages provided, identify each distinct interpretation of the question that the passages can answer, and answer it from the passages. For each interpretation output three lines:
Interpretation: <the disambiguated question>
Answer: <the answer, based only on the passages>
Passage: <the id of the passage supporting the answer>

Question: {question}
Passages:
{passages}""",
}

_PLACEHOLDER_RE = re.compile(r"\{([a-zA-Z_][a-zA-Z0-9_]*)\}")


class GatewayError(Exception):
    pass


class RenderError(GatewayError):
    pass


class BackendError(GatewayError):
    """Transport or backend failure; retriable."""


class TemplateStore:
    """Built-in prompt bodies, optionally overridden from a directory.

    Override files are named `<template_id>.txt` and replace the default
    body wholesale.
    """

    def __init__(self, override_dir: "str | Path | None" = None):
        self._templates = dict(DEFAULT_TEMPLATES)
        if override_dir is not None:
            for tid in TEMPLATE_IDS:
                path = Path(override_dir) / f"{tid}.txt"
                if path.exists():
                    self._templates[tid] = path.read_text(encoding="utf-8")

    def body(self, template_id: str) -> str:
        if template_id not in self._templates:
            raise RenderError(f"unknown template: {template_id}")
        return self._templates[template_id]

    def render(self, template_id: str, fields: dict[str, str]) -> str:
        body = self.body(template_id)
        needed = set(_PLACEHOLDER_RE.findall(body))
        missing = sorted(needed - set(fields))
        if missing:
            raise RenderError(f"missing field: {missing[0]}")

        def sub(m: re.Match) -> str:
            return fields[m.group(1)]

        return _PLACEHOLDER_RE.sub(sub, body)


def render(template_id: str, fields: dict[str, str],
           templates: "TemplateStore | None" = None) -> str:
    return (templates or TemplateStore()).render(template_id, fields)


@dataclass(frozen=True)
class GenerationRequest:
    template_id: str
    rendered_prompt: str
    tag: str = ""
    passages_in_context: int = 0
    decode: str = "greedy"  # fixed; sampling is out of scope


@dataclass(frozen=True)
class GenerationResponse:
    text: str
    input_tokens_estimate: int
    backend_id: str
    latency: float


def estimate_tokens(text: str) -> int:
    # Whitespace word count x 1.3: only relative magnitudes matter here.
    return int(len(text.split()) * 1.3)


class Backend(Protocol):
    backend_id: str

    def generate(self, template_id: str, prompt: str, tag: str) -> str: ...


class ScriptKeyError(BackendError):
    pass


class ScriptedBackend:
    """Deterministic backend keyed on (template_id, tag).

    Lookup order for a tag: exact match, then the prefix before the first
    "||" (so "<interpretation>||<passage_id>" keys can be scripted at
    either granularity), then the wildcard "*".
    """

    backend_id = "scripted"

    def __init__(self, script: dict[str, dict[str, str]]):
        self.script = script
        self.calls: list[tuple[str, str, str]] = []  # (template_id, tag, prompt)

    @classmethod
    def from_file(cls, path: "str | Path") -> "ScriptedBackend":
        with open(path, encoding="utf-8") as fh:
            return cls(json.load(fh))

    def generate(self, template_id: str, prompt: str, tag: str) -> str:
        self.calls.append((template_id, tag, prompt))
        per_template = self.script.get(template_id, {})
        for key in (tag, tag.split("||", 1)[0], "*"):
            if key in per_template:
                return per_template[key]
        raise ScriptKeyError(f"no scripted response for ({template_id}, {tag!r})")


class HttpBackend:
    """Generic single-endpoint HTTP backend.

    POSTs {"prompt", "max_tokens", "temperature": 0} as JSON and expects
    {"text": ...} back. URL and auth token come from arguments or the
    VERDICT_LLM_URL / VERDICT_LLM_TOKEN environment variables.
    """

    def __init__(self, url: "str | None" = None, token: "str | None" = None,
                 max_tokens: int = 1024, timeout: float = 60.0,
                 backend_id: str = "http"):
        self.url = url or os.environ.get("VERDICT_LLM_URL", "")
        self.token = token or os.environ.get("VERDICT_LLM_TOKEN", "")
        self.max_tokens = max_tokens
        self.timeout = timeout
        self.backend_id = backend_id
        if not self.url:
            raise GatewayError("HTTP backend requires an endpoint URL")

    def generate(self, template_id: str, prompt: str, tag: str) -> str:
        import requests

        headers = {"Content-Type": "application/json"}
        if self.token:
            headers["Authorization"] = f"Bearer {self.token}"
        try:
            resp = requests.post(
                self.url,
                json={"prompt": prompt, "max_tokens": self.max_tokens,
                      "temperature": 0},
                headers=headers,
                timeout=self.timeout,
            )
            resp.raise_for_status()
            return resp.json()["text"]
        except Exception as exc:  # transport, HTTP status, or shape errors
            raise BackendError(str(exc)) from exc


class Gateway:
    """Backend wrapper that retries, times, and ledgers every attempt."""

    def __init__(self, backend: Backend, ledger: "CostLedger | None" = None,
                 templates: "TemplateStore | None" = None, retries: int = 2):
        self.backend = backend
        self.ledger = ledger if ledger is not None else CostLedger()
        self.templates = templates or TemplateStore()
        self.retries = retries

    def render(self, template_id: str, fields: dict[str, str]) -> str:
        return self.templates.render(template_id, fields)

    def complete(self, request: GenerationRequest) -> GenerationResponse:
        tokens = estimate_tokens(request.rendered_prompt)
        last_error: Optional[Exception] = None
        for _ in range(self.retries + 1):
            start = time.monotonic()
            try:
                text = self.backend.generate(
                    request.template_id, request.rendered_prompt, request.tag
                )
            except BackendError as exc:
                last_error = exc
                self.ledger.record_llm(
                    request.template_id, request.passages_in_context,
                    tokens, "error", request.tag,
                )
                continue
            self.ledger.record_llm(
                request.template_id, request.passages_in_context,
                tokens, "ok", request.tag,
            )
            return GenerationResponse(
                text=text,
                input_tokens_estimate=tokens,
                backend_id=self.backend.backend_id,
                latency=time.monotonic() - start,
            )
        raise BackendError(
            f"backend failed after {self.retries + 1} attempts: {last_error}"
        )


@dataclass(frozen=True)
class ExtractionParse:
    pair: Optional[tuple[str, str]]  # (interpretation, answer)
    warning: bool = False


_ABSTAIN_TOKENS = {"null", "none"}
# Label-anchored scan, tolerant of markdown framing like "**Answer:** x".
_LABEL_RE = re.compile(
    r"^[\s#*\->]*(interpretation|answer)\b[\s*]*:\s*(.*)$", re.IGNORECASE
)


def _is_abstention(value: str) -> bool:
    return value.strip().strip("'\"`.").lower() in _ABSTAIN_TOKENS


def parse_extraction(text: str) -> ExtractionParse:
    """Parse an interpretation/answer pair out of generator output.

    Abstention ("null") is a normal outcome, not a warning; missing or
    malformed fields are absent with a warning flag. Never raises.
    """
    stripped = text.strip()
    if not stripped or _is_abstention(stripped):
        return ExtractionParse(pair=None, warning=False)
    fields: dict[str, str] = {}
    for line in stripped.splitlines():
        m = _LABEL_RE.match(line)
        if m:
            label = m.group(1).lower()
            if label not in fields:  # first occurrence wins
                fields[label] = m.group(2).strip().strip("*").strip()
    interp = fields.get("interpretation", "")
    answer = fields.get("answer", "")
    if _is_abstention(interp) or _is_abstention(answer):
        return ExtractionParse(pair=None, warning=False)
    if interp and answer:
        return ExtractionParse(pair=(interp, answer), warning=False)
    return ExtractionParse(pair=None, warning=True)


def format_extraction(interpretation: str, answer: str) -> str:
    """Render a pair in the output shape parse_extraction reads back."""
    return f"Interpretation: {interpretation}\nAnswer: {answer}"


def parse_yes_no(text: str) -> bool:
    """First Yes/No token decides; anything else is a conservative No."""
    for token in re.findall(r"[A-Za-z]+", text):
        if token.lower() == "yes":
            return True
        if token.lower() == "no":
            return False
    return False


def parse_yes_no_list(text: str, expected: int) -> tuple[list[bool], bool]:
    """Per-line Yes/No verdicts, padded with No on length mismatch.

    Returns (verdicts, padded_flag).
    """
    verdicts: list[bool] = []
    for line in text.splitlines():
        tokens = re.findall(r"[A-Za-z]+", line)
        hits = [t.lower() for t in tokens if t.lower() in ("yes", "no")]
        if hits:
            verdicts.append(hits[0] == "yes")
    padded = len(verdicts) != expected
    verdicts = verdicts[:expected]
    verdicts += [False] * (expected - len(verdicts))
    return verdicts, padded


def parse_lines(text: str) -> list[str]:
    """Non-empty lines with list markers stripped, for line-delimited lists."""
    out = []
    for line in text.splitlines():
        cleaned = re.sub(r"^\s*(?:[-*•]|\d+[.)])\s*", "", line).strip()
        if cleaned and not _is_abstention(cleaned):
            out.append(cleaned)
    return out
