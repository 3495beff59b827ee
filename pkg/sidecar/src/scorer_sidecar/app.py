"""HTTP surface.

Implements the scorer wire contract:

    POST /v1/nli    {"pairs": [{"premise": ..., "hypothesis": ...}, ...]}
        -> {"model": ..., "results": [{"entailment", "neutral", "contradiction"}, ...]}
    POST /v1/embed  {"inputs": [...]}
        -> {"model": ..., "dim": ..., "vectors": [...]}
    GET /healthz    -> {"status": "ok", "nli_model": ..., "embed_model": ...}

Results preserve request order. Oversize batches are refused with 413
naming the configured ceiling; blank strings are refused with 422 naming
the offending field; backend failures surface as 500 with a message.
"""

from __future__ import annotations

import threading

from fastapi import FastAPI, HTTPException
from pydantic import BaseModel

from .config import SidecarConfig


class NliPair(BaseModel):
    premise: str
    hypothesis: str


class NliRequest(BaseModel):
    pairs: list[NliPair]


class EmbedRequest(BaseModel):
    inputs: list[str]


def _check_batch(size: int, max_batch: int, what: str) -> None:
    if size > max_batch:
        raise HTTPException(
            status_code=413,
            detail=f"batch of {size} {what} exceeds max_batch={max_batch}",
        )


def _check_nonempty(value: str, field: str) -> None:
    if not value.strip():
        raise HTTPException(
            status_code=422, detail=f"{field} must be a nonempty string"
        )


def create_app(config: SidecarConfig, nli_backend, embed_backend) -> FastAPI:
    app = FastAPI(title="scorer-sidecar")
    # one request scores at a time; concurrency stays at the HTTP layer
    inference_lock = threading.Lock()

    @app.get("/healthz")
    def healthz():
        return {
            "status": "ok",
            "nli_model": nli_backend.model_id,
            "embed_model": embed_backend.model_id,
        }

    @app.post("/v1/nli")
    def nli(request: NliRequest):
        _check_batch(len(request.pairs), config.max_batch, "pairs")
        for i, pair in enumerate(request.pairs):
            _check_nonempty(pair.premise, f"pairs[{i}].premise")
            _check_nonempty(pair.hypothesis, f"pairs[{i}].hypothesis")
        try:
            with inference_lock:
                triples = nli_backend.predict(
                    [(pair.premise, pair.hypothesis) for pair in request.pairs]
                )
        except Exception as exc:
            raise HTTPException(status_code=500, detail=f"NLI backend error: {exc}")
        return {
            "model": nli_backend.model_id,
            "results": [
                {"entailment": e, "neutral": n, "contradiction": c}
                for e, n, c in triples
            ],
        }

    @app.post("/v1/embed")
    def embed(request: EmbedRequest):
        _check_batch(len(request.inputs), config.max_batch, "inputs")
        for i, text in enumerate(request.inputs):
            _check_nonempty(text, f"inputs[{i}]")
        try:
            with inference_lock:
                vectors = embed_backend.predict(list(request.inputs))
        except Exception as exc:
            raise HTTPException(status_code=500, detail=f"embedding backend error: {exc}")
        return {
            "model": embed_backend.model_id,
            "dim": embed_backend.dim,
            "vectors": vectors,
        }

    return app
