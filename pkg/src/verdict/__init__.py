"""Grounded disambiguation of ambiguous queries over a retrieval corpus."""

from .types import (
    CandidatePair,
    ClarificationItem,
    ClarificationSet,
    Corpus,
    DiversificationResult,
    Passage,
    ScoredPassage,
    SetSource,
    Universe,
    UniverseKind,
)
from .ledger import CostLedger, summarize_ledger
from .embedding import HashEmbeddingProvider, cosine, embed
from .gateway import Gateway, ScriptedBackend, TemplateStore, parse_extraction
from .retrieval import (
    RetrievalConfig,
    VectorIndex,
    build_universe,
    ingest,
    relax_query,
    rerank,
    retrieve_topk,
)
from .diversify import diversify, extract_pair
from .consolidate import ConsolidationConfig, consolidate, embed_pair, select_medoid
from .baselines import BaselineConfig, dtv_pipeline, rac
from .evaluation import (
    GoldSet,
    Judge,
    bleu_match,
    evaluate_query,
    g_f1,
    load_gold,
    sentence_bleu,
)
from .orchestrator import Engine, RunConfig, SessionStore, export_report, run_batch

__version__ = "0.1.0"
