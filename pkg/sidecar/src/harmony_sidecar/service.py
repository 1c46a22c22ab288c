"""HTTP surface: POST /embed, POST /keywords, GET /models, GET /healthz.

All models load at startup and are never swapped; request handling is
stateless, so responses are deterministic for fixed weights.
"""

from __future__ import annotations

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from pydantic import BaseModel, ConfigDict

from .encoder import Encoder
from .keywords import EmptyTextError, extract_keywords
from .registry import Registry

MAX_BATCH = 256


class EmbedRequest(BaseModel):
    model_config = ConfigDict(protected_namespaces=())

    model: str
    texts: list[str]


class KeywordRequest(BaseModel):
    text: str
    max_words: int = 15


def _error(status: int, code: str, message: str) -> JSONResponse:
    return JSONResponse({"code": code, "message": message}, status_code=status)


def build_service(registry: Registry) -> FastAPI:
    """Load every registry entry, then return the app."""
    encoders = {e.model_id: Encoder(e) for e in registry.entries}
    return create_app(registry, encoders)


def create_app(registry: Registry, encoders: dict[str, Encoder]) -> FastAPI:
    app = FastAPI(title="harmony embedding sidecar")

    @app.exception_handler(RequestValidationError)
    async def on_validation_error(request: Request, exc: RequestValidationError):
        return _error(400, "invalid_request", str(exc.errors()))

    @app.get("/healthz")
    def healthz():
        return {"status": "ok", "models": sorted(encoders)}

    @app.get("/models")
    def models():
        return {
            "models": [
                {"model_id": e.model_id, "dim": e.dim, "prefix_rule": e.prefix_rule}
                for e in registry.entries
            ]
        }

    @app.post("/embed")
    def embed(body: EmbedRequest):
        encoder = encoders.get(body.model)
        if encoder is None:
            return _error(
                400, "unknown_model", f"unknown model: {body.model!r}"
            )
        if not body.texts:
            return _error(400, "invalid_request", "texts must not be empty")
        if len(body.texts) > MAX_BATCH:
            return _error(
                413,
                "batch_too_large",
                f"{len(body.texts)} texts exceeds the {MAX_BATCH} limit",
            )
        vectors = encoder.encode(body.texts)
        return {"dim": encoder.entry.dim, "vectors": vectors.tolist()}

    @app.post("/keywords")
    def keywords(body: KeywordRequest):
        if body.max_words < 1:
            return _error(400, "invalid_request", "max_words must be >= 1")
        try:
            result = extract_keywords(
                encoders[registry.keyword_model], body.text, body.max_words
            )
        except EmptyTextError as exc:
            return _error(400, "empty_text", str(exc))
        return {"keywords": result}

    return app
