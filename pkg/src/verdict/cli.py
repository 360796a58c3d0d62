"""Command-line entry points.

Exit codes: 0 success, 1 configuration error, 2 runtime failure.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from .embedding import HashEmbeddingProvider
from .orchestrator import ConfigError, RunConfig, assemble_report, export_report, run_batch
from .retrieval import IngestError, VectorIndex, ingest


@click.group()
def main() -> None:
    """Grounded disambiguation engine for ambiguous queries."""


@main.command("ingest")
@click.argument("corpus", type=click.Path(exists=True))
@click.option("--index-out", required=True, type=click.Path())
@click.option("--dim", default=64, show_default=True)
def ingest_cmd(corpus: str, index_out: str, dim: int) -> None:
    """Ingest a JSONL corpus and persist a vector index."""
    try:
        loaded = ingest(corpus)
    except IngestError as exc:
        click.echo(f"ingest failed: {exc}", err=True)
        sys.exit(1)
    try:
        index = VectorIndex(loaded, HashEmbeddingProvider(dim=dim))
        index.save(index_out)
    except Exception as exc:
        click.echo(f"indexing failed: {exc}", err=True)
        sys.exit(2)
    click.echo(f"indexed {len(loaded)} passages -> {index_out}")


@main.command("run")
@click.option("--config", "config_path", required=True,
              type=click.Path(exists=True))
@click.option("--method", default=None,
              type=click.Choice(["verdict", "dtv", "dtv_noverify", "rac"]))
def run_cmd(config_path: str, method: "str | None") -> None:
    """Run a batch over the gold queries and write a report."""
    try:
        config = RunConfig.from_file(config_path, method_override=method)
    except ConfigError as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(1)
    try:
        report = run_batch(config)
    except Exception as exc:
        click.echo(f"run failed: {exc}", err=True)
        sys.exit(2)
    click.echo(json.dumps(report["aggregate"], sort_keys=True, indent=2))
    click.echo(f"report written to {Path(config.output_dir) / 'report.json'}")


@main.command("eval")
@click.option("--run-dir", required=True, type=click.Path(exists=True))
def eval_cmd(run_dir: str) -> None:
    """Re-aggregate per-query eval artifacts into a report."""
    rows = []
    query_dirs = sorted(Path(run_dir).glob("queries/*/eval.json"))
    if not query_dirs:
        click.echo("no per-query eval artifacts found", err=True)
        sys.exit(1)
    for path in query_dirs:
        rows.append(json.loads(path.read_text(encoding="utf-8")))
    existing = Path(run_dir) / "report.json"
    method = "unknown"
    cost = {}
    if existing.exists():
        prior = json.loads(existing.read_text(encoding="utf-8"))
        method, cost = prior.get("method", method), prior.get("cost", {})
    report = assemble_report(method, rows, cost)
    click.echo(json.dumps(report["aggregate"], sort_keys=True, indent=2))


@main.command("report")
@click.option("--run-dir", required=True, type=click.Path(exists=True))
def report_cmd(run_dir: str) -> None:
    """Render a markdown metric table over the run directory."""
    click.echo(export_report(run_dir))


@main.command("serve")
@click.option("--addr", default="127.0.0.1:8080", show_default=True)
@click.option("--config", "config_path", required=True,
              type=click.Path(exists=True))
def serve_cmd(addr: str, config_path: str) -> None:
    """Serve the interactive clarification API."""
    from .service import serve

    host, _, port = addr.partition(":")
    try:
        serve(config_path, host or "127.0.0.1", int(port or 8080))
    except ConfigError as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(1)


if __name__ == "__main__":
    main()
