"""HTTP surface: JSON endpoints over one Engine instance.

Every error payload is {code, message, detail} so the console and the
CLI can share handling; reads never block on writers.
"""
from __future__ import annotations

import base64
import binascii

from fastapi import FastAPI, Request
from fastapi.encoders import jsonable_encoder
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from pydantic import BaseModel, ConfigDict

from refmatch.config import EngineConfig, split_listen
from refmatch.core import Embedding, normalize
from refmatch.engine import Engine
from refmatch.errors import (
    BadRequest,
    DimMismatch,
    EngineError,
    UnknownClassId,
    UnknownLabel,
)
from refmatch.featurize import decode_image, toy_featurize


class DiagnoseRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    vector: list[float] | None = None
    image_b64: str | None = None
    k: int | None = None
    n: int | None = None
    theta: float | None = None


class RetrieveRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    vector: list[float] | None = None
    image_b64: str | None = None
    k: int = 10


class AugmentRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    manifest_path: str
    site_id: str


class ScoredPair(BaseModel):
    model_config = ConfigDict(extra="forbid")

    cscore: float
    correct: bool


class CalibrateRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    scored: list[ScoredPair]


def _status_for(exc: EngineError) -> int:
    if isinstance(exc, DimMismatch):
        return 409
    if isinstance(exc, (UnknownLabel, UnknownClassId)):
        return 422
    return 400


def _query_from(payload, engine: Engine) -> Embedding:
    has_vector = payload.vector is not None
    has_image = payload.image_b64 is not None
    if has_vector == has_image:
        raise BadRequest("provide exactly one of vector or image_b64")
    if has_vector:
        return normalize(payload.vector)
    try:
        data = base64.b64decode(payload.image_b64, validate=True)
    except (binascii.Error, ValueError) as exc:
        raise BadRequest(f"image_b64 is not valid base64: {exc}") from exc
    return toy_featurize(decode_image(data), engine.snapshot.dim)


def create_app(engine: Engine) -> FastAPI:
    app = FastAPI(title="refmatch", docs_url=None, redoc_url=None)
    app.state.engine = engine

    @app.exception_handler(EngineError)
    async def engine_error(request: Request, exc: EngineError):
        return JSONResponse(status_code=_status_for(exc), content=exc.to_json())

    @app.exception_handler(RequestValidationError)
    async def malformed(request: Request, exc: RequestValidationError):
        return JSONResponse(
            status_code=400,
            content={
                "code": "BAD_REQUEST",
                "message": "malformed request body",
                "detail": {"errors": jsonable_encoder(exc.errors())},
            },
        )

    @app.post("/v1/diagnose")
    def diagnose(payload: DiagnoseRequest):
        query = _query_from(payload, engine)
        return engine.diagnose(query, k=payload.k, n=payload.n).to_json()

    @app.post("/v1/diagnose/confident")
    def diagnose_confident(payload: DiagnoseRequest):
        query = _query_from(payload, engine)
        return engine.diagnose_confident(
            query, k=payload.k, theta=payload.theta
        ).to_json()

    @app.post("/v1/retrieve")
    def retrieve(payload: RetrieveRequest):
        query = _query_from(payload, engine)
        hits, generation = engine.retrieve(query, k=payload.k)
        return {
            "hits": [
                {
                    "item_id": h.item_id,
                    "score": h.score,
                    "external_ref": h.external_ref,
                    "source_tag": h.source_tag,
                }
                for h in hits
            ],
            "generation": generation,
        }

    @app.post("/v1/libraries/augment")
    def augment(payload: AugmentRequest):
        return engine.augment(payload.manifest_path, payload.site_id)

    @app.post("/v1/calibrate")
    def calibrate(payload: CalibrateRequest):
        result = engine.calibrate([(p.cscore, p.correct) for p in payload.scored])
        body = result.to_json()
        body["generation"] = engine.generation
        return body

    @app.get("/v1/metrics")
    def metrics():
        return engine.metrics()

    @app.get("/v1/health")
    def health():
        return engine.health()

    return app


def run_service(config: EngineConfig) -> None:
    """Blocking uvicorn server over a freshly loaded engine."""
    import uvicorn

    host, port = split_listen(config.listen_address)
    uvicorn.run(create_app(Engine.load(config)), host=host, port=port, log_level="warning")
