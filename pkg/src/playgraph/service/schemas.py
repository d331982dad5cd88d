"""Request/response payloads for the HTTP service.

Every response carries an explicit schema_version. Request models forbid
unknown fields so malformed bodies fail fast with the offending field
named.
"""

from __future__ import annotations

from typing import Dict, List, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field

SCHEMA_VERSION = "1"


class PlayerPayload(BaseModel):
    model_config = ConfigDict(extra="forbid")

    player_id: str
    team: str
    position: List[float]
    velocity: float = 0.0
    displacement: float = 0.0
    alive: bool = True
    is_ball_carrier: bool = False
    hp: float = 0.0
    armor: float = 0.0
    equipment_value: float = 0.0
    grenades: float = 0.0
    has_helmet: bool = False
    has_defuse_kit: bool = False
    zone_id: int = 0


class StatePayload(BaseModel):
    model_config = ConfigDict(extra="forbid", populate_by_name=True)

    t: float
    global_features: List[float] = Field(alias="global")
    players: List[PlayerPayload]
    outcome: Optional[float] = None
    partition_key: str = ""

    def as_record(self) -> dict:
        return self.model_dump(by_alias=True)


class PerturbationPayload(BaseModel):
    model_config = ConfigDict(extra="forbid")

    player_id: str
    kind: str
    coords: Optional[List[float]] = None
    anchor_id: Optional[str] = None
    angle: Optional[float] = None
    attribute: Optional[str] = None
    value: Optional[object] = None


class PredictRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    state: StatePayload


class WhatIfRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    state: StatePayload
    perturbation: PerturbationPayload


class GridSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    nx: int = Field(ge=1, le=200)
    ny: int = Field(ge=1, le=200)


class SweepRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    state: StatePayload
    player_id: str
    grid: Optional[GridSpec] = None
    cells: Optional[List[List[float]]] = None


class PredictionPayload(BaseModel):
    schema_version: str = SCHEMA_VERSION
    value: float
    attention: Optional[List[List[List[float]]]] = None
    node_order: List[str]


class WhatIfResponse(BaseModel):
    schema_version: str = SCHEMA_VERSION
    baseline: PredictionPayload
    perturbed: PredictionPayload
    delta: float
    expected_end_line: Optional[float] = None
    perturbed_state: dict


class SweepCell(BaseModel):
    coords: List[float]
    value: float
    delta: float


class SweepResponse(BaseModel):
    schema_version: str = SCHEMA_VERSION
    player_id: str
    baseline_value: float
    cells: List[SweepCell]


class ModelInfoResponse(BaseModel):
    schema_version: str = SCHEMA_VERSION
    spec: Dict[str, object]
    task: str
    node_schema: Optional[dict] = None
    state_schema: Optional[dict] = None


class HealthResponse(BaseModel):
    schema_version: str = SCHEMA_VERSION
    status: str = "ok"
