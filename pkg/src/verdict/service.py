"""HTTP service for interactive clarification and batch runs.

JSON API:
  POST /clarify {query}                 -> session
  GET  /session/{id}                    -> session
  POST /session/{id}/choose {index}     -> {answer, passage_id, snippet}
  POST /runs {config_ref}               -> {run_id}
  GET  /runs/{id}/report                -> report JSON
Errors are {code, message}.
"""

from __future__ import annotations

import json
import uuid
from pathlib import Path

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from .orchestrator import (
    ConfigError,
    Engine,
    RunConfig,
    SessionNotFound,
    SessionStore,
    run_batch,
)


class ClarifyBody(BaseModel):
    query: str


class ChooseBody(BaseModel):
    index: int


class RunBody(BaseModel):
    config_ref: str
    method: "str | None" = None


def create_app(config: RunConfig) -> FastAPI:
    app = FastAPI(title="verdict clarification service")
    engine = Engine(config)
    store = SessionStore(engine)
    runs: dict[str, dict] = {}

    def error(status: int, code: str, message: str) -> JSONResponse:
        return JSONResponse(status_code=status,
                            content={"code": code, "message": message})

    @app.exception_handler(SessionNotFound)
    async def _not_found(request: Request, exc: SessionNotFound):
        return error(404, "not_found", f"unknown session: {exc}")

    @app.exception_handler(ValueError)
    async def _validation(request: Request, exc: ValueError):
        return error(400, "validation_error", str(exc))

    @app.exception_handler(ConfigError)
    async def _config(request: Request, exc: ConfigError):
        return error(400, "config_error", str(exc))

    @app.post("/clarify")
    def clarify(body: ClarifyBody) -> dict:
        session = store.start_session(body.query)
        return session.to_dict()

    @app.get("/session/{session_id}")
    def get_session(session_id: str) -> dict:
        return store.get_session(session_id).to_dict()

    @app.post("/session/{session_id}/choose")
    def choose(session_id: str, body: ChooseBody) -> dict:
        return store.choose(session_id, body.index)

    @app.post("/runs")
    def start_run(body: RunBody) -> dict:
        if not Path(body.config_ref).exists():
            raise ConfigError(f"config not found: {body.config_ref}")
        run_config = RunConfig.from_file(body.config_ref,
                                         method_override=body.method)
        run_id = uuid.uuid4().hex
        runs[run_id] = run_batch(run_config)  # synchronous at desk scale
        return {"run_id": run_id}

    @app.get("/runs/{run_id}/report")
    def run_report(run_id: str):
        if run_id not in runs:
            return error(404, "not_found", f"unknown run: {run_id}")
        return runs[run_id]

    return app


def serve(config_path: str, host: str, port: int) -> None:
    import uvicorn

    config = RunConfig.from_file(config_path)
    uvicorn.run(create_app(config), host=host, port=port)
