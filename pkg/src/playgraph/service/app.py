"""HTTP surface over a loaded checkpoint.

The service is stateless between requests apart from the immutable model
parameters; inference is read-only numpy work, so handlers take no global
lock and concurrent requests are safe. The CLI's predict/whatif paths call
the same package functions, so both surfaces return identical numbers.
"""

from __future__ import annotations

import dataclasses
import logging
import uuid
from typing import Optional, Tuple

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse

from ..errors import (
    ContractViolationError,
    DataError,
    SchemaMismatchError,
)
from ..game import (
    NFL_FIELD_LENGTH,
    NFL_FIELD_WIDTH,
    DEFAULT_CSGO_GEOMETRY,
    GameState,
    SPORT_NFL,
    state_from_dict,
    validate_state,
)
from ..models import ModelParams, predict_state
from ..whatif import (
    Perturbation,
    make_grid,
    position_sweep,
    prediction_to_dict,
    what_if,
    whatif_result_to_dict,
)
from .schemas import (
    SCHEMA_VERSION,
    PredictRequest,
    SweepRequest,
    WhatIfRequest,
)

log = logging.getLogger("playgraph.service")


def _payload_state(payload) -> GameState:
    state = state_from_dict(payload.as_record(), strict=True)
    problems = validate_state(state)
    if problems:
        raise DataError("; ".join(problems))
    return state


def _payload_perturbation(payload) -> Perturbation:
    return Perturbation(
        player_id=payload.player_id,
        kind=payload.kind,
        coords=tuple(payload.coords) if payload.coords is not None else None,
        anchor_id=payload.anchor_id,
        angle=payload.angle,
        attribute=payload.attribute,
        value=payload.value,
    )


def _field_bounds(state: GameState) -> Tuple[float, float]:
    if state.sport() == SPORT_NFL:
        return (NFL_FIELD_LENGTH, NFL_FIELD_WIDTH)
    return DEFAULT_CSGO_GEOMETRY.bounds


def create_app(params: ModelParams) -> FastAPI:
    app = FastAPI(title="playgraph", version=SCHEMA_VERSION)
    # The board UI is served from its own origin during development.
    app.add_middleware(CORSMiddleware, allow_origins=["*"],
                       allow_methods=["*"], allow_headers=["*"])

    @app.exception_handler(RequestValidationError)
    async def malformed_body(request: Request, exc: RequestValidationError):
        details = [
            {"field": ".".join(str(p) for p in err["loc"]), "message": err["msg"]}
            for err in exc.errors()
        ]
        return JSONResponse(status_code=400, content={
            "schema_version": SCHEMA_VERSION,
            "error": "malformed request body",
            "details": details,
        })

    @app.exception_handler(SchemaMismatchError)
    async def schema_mismatch(request: Request, exc: SchemaMismatchError):
        return JSONResponse(status_code=409, content={
            "schema_version": SCHEMA_VERSION, "error": str(exc),
        })

    @app.exception_handler(DataError)
    async def invalid_data(request: Request, exc: DataError):
        return JSONResponse(status_code=422, content={
            "schema_version": SCHEMA_VERSION, "error": str(exc),
        })

    @app.exception_handler(ContractViolationError)
    async def contract_violation(request: Request, exc: ContractViolationError):
        return JSONResponse(status_code=422, content={
            "schema_version": SCHEMA_VERSION, "error": str(exc),
        })

    @app.exception_handler(Exception)
    async def internal(request: Request, exc: Exception):
        incident = uuid.uuid4().hex[:12]
        log.exception("internal error %s on %s", incident, request.url.path)
        return JSONResponse(status_code=500, content={
            "schema_version": SCHEMA_VERSION,
            "error": "internal error",
            "incident_id": incident,
        })

    @app.get("/health")
    def health():
        return {"schema_version": SCHEMA_VERSION, "status": "ok"}

    @app.get("/model/info")
    def model_info():
        return {
            "schema_version": SCHEMA_VERSION,
            "spec": dataclasses.asdict(params.spec),
            "task": params.spec.task,
            "node_schema": (params.node_schema.to_dict()
                            if params.node_schema else None),
            "state_schema": (params.state_schema.to_dict()
                             if params.state_schema else None),
        }

    @app.post("/predict")
    def predict(req: PredictRequest):
        state = _payload_state(req.state)
        pred = predict_state(params, state)
        body = prediction_to_dict(pred)
        body["schema_version"] = SCHEMA_VERSION
        return body

    @app.post("/whatif")
    def whatif(req: WhatIfRequest):
        state = _payload_state(req.state)
        perturbation = _payload_perturbation(req.perturbation)
        result = what_if(params, state, perturbation,
                         bounds=_field_bounds(state))
        body = whatif_result_to_dict(result)
        body["schema_version"] = SCHEMA_VERSION
        return body

    @app.post("/sweep")
    def sweep(req: SweepRequest):
        state = _payload_state(req.state)
        bounds = _field_bounds(state)
        if req.cells:
            grid = [tuple(float(c) for c in cell) for cell in req.cells]
        elif req.grid:
            grid = make_grid(bounds, req.grid.nx, req.grid.ny)
        else:
            raise DataError("sweep request needs either cells or a grid spec")
        baseline = predict_state(params, state).value
        ranked = position_sweep(params, state, req.player_id, grid,
                                bounds=bounds)
        return {
            "schema_version": SCHEMA_VERSION,
            "player_id": req.player_id,
            "baseline_value": baseline,
            "cells": [{"coords": list(coords), "value": value,
                       "delta": value - baseline}
                      for coords, value in ranked],
        }

    return app


def serve(params: ModelParams, bind: str = "127.0.0.1", port: int = 8008,
          log_level: str = "info") -> None:
    import uvicorn

    app = create_app(params)
    uvicorn.run(app, host=bind, port=port, log_level=log_level)
