"""FastAPI wiring for the wire protocol.

    GET  /v1/health       -> {"model", "n_layers", "attention_layer"}
    POST /v1/score_paths  -> {"scores": [...], "chunked"?: true}
    POST /v1/judge        -> {"selected": [...], "unparseable"?: true}
    POST /v1/answer       -> {"answers": [{"text","confidence"}], "raw_text"}

Every error is a non-2xx JSON body with a single "error" string. Auth is an
optional bearer token.
"""

from __future__ import annotations

import logging

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from .engine import InferenceEngine

logger = logging.getLogger(__name__)


class PathsRequest(BaseModel):
    question: str
    paths: list[str] = Field(min_length=1)


class JudgeRequest(BaseModel):
    question: str
    paths: list[str] = Field(min_length=1)


class AnswerRequest(BaseModel):
    prompt: str
    max_new_tokens: int = Field(default=256, ge=1, le=2048)


def create_app(engine: InferenceEngine, auth_token: str | None = None) -> FastAPI:
    app = FastAPI(title="model-adapter", version="0.1.0")

    @app.exception_handler(RequestValidationError)
    async def validation_error(_request: Request, exc: RequestValidationError):
        return JSONResponse(status_code=400, content={"error": str(exc.errors())})

    @app.exception_handler(Exception)
    async def internal_error(_request: Request, exc: Exception):
        logger.exception("request failed")
        return JSONResponse(status_code=500, content={"error": str(exc)})

    def authorized(request: Request) -> bool:
        if not auth_token:
            return True
        return request.headers.get("Authorization") == f"Bearer {auth_token}"

    @app.middleware("http")
    async def auth_middleware(request: Request, call_next):
        if not authorized(request):
            return JSONResponse(status_code=401, content={"error": "unauthorized"})
        return await call_next(request)

    @app.get("/v1/health")
    def health():
        return engine.health()

    @app.post("/v1/score_paths")
    def score_paths(body: PathsRequest):
        reply = engine.score_paths(body.question, body.paths)
        out = {"scores": reply.scores}
        if reply.chunked:
            out["chunked"] = True
        return out

    @app.post("/v1/judge")
    def judge(body: JudgeRequest):
        result = engine.judge(body.question, body.paths)
        out = {"selected": result.selected}
        if result.unparseable:
            out["unparseable"] = True
        return out

    @app.post("/v1/answer")
    def answer(body: AnswerRequest):
        reply = engine.answer(body.prompt, body.max_new_tokens)
        return {
            "answers": [{"text": a.text, "confidence": a.confidence} for a in reply.answers],
            "raw_text": reply.raw_text,
        }

    return app
