"""End-to-end wiring: batch evaluation runs and interactive sessions.

A RunConfig (one JSON document) names the corpus, gold file, method, and
backend roles; run_batch executes the method per gold query, evaluates it,
writes per-query artifacts for audit, and aggregates a deterministic
report. The session store backs the clarification service: one pipeline
run per ambiguous query, then the user picks an interpretation and gets
the precomputed answer with its cited passage.
"""

from __future__ import annotations

import json
import uuid
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Optional

from .baselines import BaselineConfig, dtv_pipeline, rac
from .consolidate import ConsolidationConfig, consolidate
from .diversify import diversify
from .embedding import HashEmbeddingProvider
from .evaluation import GoldSet, Judge, evaluate_query, load_gold
from .gateway import Gateway, ScriptedBackend, TemplateStore
from .ledger import CostLedger, summarize_ledger
from .retrieval import RetrievalConfig, VectorIndex, build_universe, ingest
from .types import ClarificationSet, Corpus, SetSource, Universe

METHODS = ("verdict", "dtv", "dtv_noverify", "rac")


class ConfigError(Exception):
    pass


@dataclass
class RunConfig:
    method: str
    corpus_path: str
    gold_path: str
    output_dir: str
    retrieval: RetrievalConfig = field(default_factory=RetrievalConfig)
    consolidation: ConsolidationConfig = field(default_factory=ConsolidationConfig)
    baseline: BaselineConfig = field(default_factory=BaselineConfig)
    backend_defs: dict = field(default_factory=dict)
    roles: dict = field(default_factory=dict)  # generator/verifier/judge -> id
    embedding_dim: int = 64
    matcher: str = "judge"
    seed: int = 0
    diversify_fanout: int = 8
    template_dir: Optional[str] = None

    def __post_init__(self) -> None:
        if self.method not in METHODS:
            raise ConfigError(f"unknown method: {self.method}")

    @classmethod
    def from_file(cls, path: "str | Path",
                  method_override: "str | None" = None) -> "RunConfig":
        base = Path(path).parent
        try:
            raw = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc

        def resolve(p: str) -> str:
            q = Path(p)
            return str(q if q.is_absolute() else base / q)

        paths = raw.get("paths", {})
        try:
            cfg = cls(
                method=method_override or raw.get("method", "verdict"),
                corpus_path=resolve(paths["corpus"]),
                gold_path=resolve(paths["gold"]),
                output_dir=resolve(paths["output_dir"]),
                retrieval=RetrievalConfig(**raw.get("retrieval", {})),
                consolidation=ConsolidationConfig(**raw.get("consolidation", {})),
                baseline=BaselineConfig(**raw.get("baseline", {})),
                backend_defs=raw.get("backends", {}).get("definitions", {}),
                roles=raw.get("backends", {}).get("roles", {}),
                embedding_dim=raw.get("embedding", {}).get("dim", 64),
                matcher=raw.get("matcher", "judge"),
                seed=raw.get("seed", 0),
                diversify_fanout=raw.get("diversify_fanout", 8),
                template_dir=(resolve(raw["template_dir"])
                              if raw.get("template_dir") else None),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"bad config: {exc}") from exc
        if method_override and method_override not in METHODS:
            raise ConfigError(f"unknown method: {method_override}")
        cfg._config_base = str(base)  # type: ignore[attr-defined]
        return cfg

    def build_backend(self, role: str):
        backend_id = self.roles.get(role)
        if backend_id is None:
            raise ConfigError(f"no backend configured for role {role!r}")
        spec = self.backend_defs.get(backend_id)
        if spec is None:
            raise ConfigError(f"backend {backend_id!r} not defined")
        kind = spec.get("type")
        if kind == "scripted":
            script = spec.get("script")
            base = getattr(self, "_config_base", ".")
            path = Path(script)
            if not path.is_absolute():
                path = Path(base) / path
            backend = ScriptedBackend.from_file(path)
            backend.backend_id = backend_id
            return backend
        if kind == "http":
            from .gateway import HttpBackend

            return HttpBackend(url=spec.get("url"), token=spec.get("token"),
                               backend_id=backend_id)
        raise ConfigError(f"unknown backend type: {kind}")


class Engine:
    """Loaded corpus, index, and backends for one configuration."""

    def __init__(self, config: RunConfig):
        self.config = config
        self.corpus: Corpus = ingest(config.corpus_path)
        self.provider = HashEmbeddingProvider(dim=config.embedding_dim)
        self.index = VectorIndex(self.corpus, self.provider)
        self.templates = TemplateStore(config.template_dir)

    def _gateway(self, role: str, ledger: CostLedger) -> Gateway:
        return Gateway(self.config.build_backend(role), ledger=ledger,
                       templates=self.templates)

    def run_query(self, q: str, ledger: CostLedger) -> tuple[ClarificationSet, dict]:
        """Execute the configured method for one query.

        Returns the clarification set plus intermediate artifacts for the
        audit trail (universe, extraction pairs, and abstentions where the
        method produces them).
        """
        cfg = self.config
        generator = self._gateway("generator", ledger)
        artifacts: dict = {}
        if cfg.method == "verdict":
            universe = build_universe(q, cfg.retrieval, generator, self.index)
            result = diversify(q, universe, generator,
                               fanout=cfg.diversify_fanout)
            cset = consolidate(result, cfg.consolidation, self.provider,
                               query=q)
            artifacts["universe"] = universe.to_dict()
            artifacts["diversification"] = result.to_dict()
            artifacts["fallback_universe"] = universe
        elif cfg.method in ("dtv", "dtv_noverify"):
            verifier = self._gateway("verifier", ledger)
            mode = "full" if cfg.method == "dtv" else "no_verification"
            cset = dtv_pipeline(q, cfg.baseline, self.index, generator,
                                verifier_gateway=verifier, mode=mode)
            artifacts["fallback_universe"] = self._uq(q, ledger=None)
        else:  # rac
            universe = build_universe(q, cfg.retrieval, generator, self.index)
            cset = rac(q, universe, generator)
            artifacts["universe"] = universe.to_dict()
            artifacts["fallback_universe"] = universe
        return cset, artifacts

    def _uq(self, q: str, ledger: "CostLedger | None") -> Universe:
        """Plain U_q used only as the evaluation fallback for methods that
        do not attach supporting passages; not billed to the method."""
        scratch = Gateway(self.config.build_backend("generator"),
                          ledger=ledger or CostLedger(),
                          templates=self.templates)
        return build_universe(q, self.config.retrieval, scratch, self.index)


def _round(value: float) -> float:
    return round(value, 6)


def run_batch(config: RunConfig) -> dict:
    """Run the configured method over every gold query and evaluate it."""
    engine = Engine(config)
    gold_sets = load_gold(config.gold_path)
    out_dir = Path(config.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    rows: list[dict] = []
    pipeline_total = {"retriever_calls": 0, "llm_calls": 0,
                      "total_passage_context": 0, "max_context": 0}
    for qi, gold in enumerate(gold_sets):
        qdir = out_dir / "queries" / f"{qi:03d}"
        qdir.mkdir(parents=True, exist_ok=True)
        try:
            ledger = CostLedger()
            cset, artifacts = engine.run_query(gold.query, ledger)
            eval_ledger = CostLedger()
            judge = Judge(engine._gateway("judge", eval_ledger))
            eval_gateway = engine._gateway("judge", eval_ledger)
            row = evaluate_query(
                cset, gold, judge, engine.corpus, eval_gateway,
                fallback=artifacts.get("fallback_universe"),
                matcher=config.matcher,
            )
            summary = summarize_ledger(ledger)
            row["cost"] = summary
            for key in pipeline_total:
                if key == "max_context":
                    pipeline_total[key] = max(pipeline_total[key], summary[key])
                else:
                    pipeline_total[key] += summary[key]
            (qdir / "clarifications.json").write_text(
                json.dumps(cset.to_dict(), sort_keys=True, indent=2))
            for name in ("universe", "diversification"):
                if name in artifacts:
                    (qdir / f"{name}.json").write_text(
                        json.dumps(artifacts[name], sort_keys=True, indent=2))
            (qdir / "eval.json").write_text(
                json.dumps(row, sort_keys=True, indent=2))
        except Exception as exc:  # isolate poisoned queries
            row = {"query": gold.query, "error": f"{type(exc).__name__}: {exc}"}
            (qdir / "eval.json").write_text(
                json.dumps(row, sort_keys=True, indent=2))
        rows.append(row)

    report = assemble_report(config.method, rows, pipeline_total)
    (out_dir / "report.json").write_text(
        json.dumps(report, sort_keys=True, indent=2))
    return report


def assemble_report(method: str, rows: list[dict], cost: dict) -> dict:
    ok_rows = [r for r in rows if "error" not in r]

    def mean(key: str) -> float:
        if not ok_rows:
            return 0.0
        return _round(sum(float(r[key]) for r in ok_rows) / len(ok_rows))

    aggregate = {
        "n_queries": len(rows),
        "n_failed": len(rows) - len(ok_rows),
        "mean_interpretations": mean("n_interpretations"),
        "sufficient_pct": _round(
            100.0 * sum(r["sufficient"] for r in ok_rows) / len(ok_rows)
        ) if ok_rows else 0.0,
        "recall_ungrounded": mean("recall_ungrounded"),
        "precision_ungrounded": mean("precision_ungrounded"),
        "g_precision": mean("g_precision"),
        "g_recall": mean("g_recall"),
        "g_f1": mean("g_f1"),
    }
    return {"method": method, "aggregate": aggregate, "cost": cost,
            "queries": rows}


REPORT_COLUMNS = [
    ("|Q^|", "mean_interpretations"),
    ("Sufficient%", "sufficient_pct"),
    ("Recall", "recall_ungrounded"),
    ("G-Precision", "g_precision"),
    ("G-Recall", "g_recall"),
    ("G-F1", "g_f1"),
]


def export_report(run_dir: "str | Path") -> str:
    """Render a markdown table over every report.json under run_dir."""
    run_dir = Path(run_dir)
    reports = sorted(run_dir.glob("**/report.json"))
    header = "| Method | " + " | ".join(name for name, _ in REPORT_COLUMNS) + " |"
    divider = "|" + "---|" * (len(REPORT_COLUMNS) + 1)
    lines = [header, divider]
    for path in reports:
        report = json.loads(path.read_text(encoding="utf-8"))
        agg = report["aggregate"]
        cells = [report["method"]] + [
            f"{agg[key]:.4f}" for _, key in REPORT_COLUMNS
        ]
        lines.append("| " + " | ".join(cells) + " |")
    table = "\n".join(lines) + "\n"
    (run_dir / "report_table.md").write_text(table)
    return table


# ---------------------------------------------------------------------------
# Interactive clarification sessions

class SessionError(Exception):
    pass


class SessionNotFound(SessionError):
    pass


@dataclass
class ClarifySession:
    session_id: str
    original_query: str
    clarifications: ClarificationSet
    chosen: Optional[int] = None
    answer_shown: Optional[str] = None
    created_at: str = ""
    snippets: list = field(default_factory=list)

    def to_dict(self) -> dict:
        clarifications = self.clarifications.to_dict()
        for item, snippet in zip(clarifications["items"], self.snippets):
            item["snippet"] = snippet
        return {
            "session_id": self.session_id,
            "original_query": self.original_query,
            "clarifications": clarifications,
            "chosen": self.chosen,
            "answer_shown": self.answer_shown,
            "created_at": self.created_at,
        }


class SessionStore:
    """In-memory session map over one Engine; snapshots are optional."""

    def __init__(self, engine: Engine, snippet_chars: int = 240):
        self.engine = engine
        self.sessions: dict[str, ClarifySession] = {}
        self.snippet_chars = snippet_chars

    def start_session(self, query: str) -> ClarifySession:
        if not query.strip():
            raise ValueError("query must be non-empty")
        cset, _ = self.engine.run_query(query, CostLedger())
        # grounding preserved at the boundary: drop anything whose citation
        # does not resolve in the loaded corpus
        resolvable = [i for i in cset.items
                      if i.passage_id and i.passage_id in self.engine.corpus]
        cset = ClarificationSet(items=resolvable, source=cset.source,
                                query=query)
        session = ClarifySession(
            session_id=uuid.uuid4().hex,
            original_query=query,
            clarifications=cset,
            created_at=datetime.now(timezone.utc).isoformat(),
            snippets=[
                self.engine.corpus.get(i.passage_id).text[:self.snippet_chars]
                for i in resolvable
            ],
        )
        self.sessions[session.session_id] = session
        return session

    def get_session(self, session_id: str) -> ClarifySession:
        if session_id not in self.sessions:
            raise SessionNotFound(session_id)
        return self.sessions[session_id]

    def choose(self, session_id: str, index: int) -> dict:
        """Mark a selection; idempotent re-choose overwrites."""
        session = self.get_session(session_id)
        if not (0 <= index < len(session.clarifications.items)):
            raise ValueError(
                f"choice index {index} out of range "
                f"(0..{len(session.clarifications.items) - 1})"
            )
        item = session.clarifications.items[index]
        session.chosen = index
        session.answer_shown = item.answer
        passage = self.engine.corpus.get(item.passage_id)
        return {
            "answer": item.answer,
            "passage_id": item.passage_id,
            "snippet": passage.text[:self.snippet_chars],
        }

    def snapshot(self, path: "str | Path") -> None:
        payload = {sid: s.to_dict() for sid, s in self.sessions.items()}
        Path(path).write_text(json.dumps(payload, sort_keys=True, indent=2))
