"""Counterfactual engine and attention introspection.

Perturb one player's position or attributes, re-run the model, and report
both predictions plus the delta. States are immutable; every perturbation
builds a new state and derived features are recomputed by the featurizers
on the next forward pass.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .errors import ContractViolationError, DataError
from .game import GameState, PlayerRecord, SPORT_NFL
from .models import ModelParams, Prediction, predict_state

PERTURBATION_KINDS = ("set_position", "circle_move", "set_attribute")

# Fields a set_attribute perturbation may touch. Identity and position are
# excluded: positions move via set_position/circle_move.
_NUMERIC_ATTRS = ("velocity", "displacement", "hp", "armor",
                  "equipment_value", "grenades")
_BOOL_ATTRS = ("alive", "is_ball_carrier", "has_helmet", "has_defuse_kit")
_INT_ATTRS = ("zone_id",)
SETTABLE_ATTRIBUTES = _NUMERIC_ATTRS + _BOOL_ATTRS + _INT_ATTRS


@dataclass(frozen=True)
class Perturbation:
    """One change to one player.

    kind set_position: ``coords`` holds the new position tuple.
    kind circle_move: rotate about ``anchor_id`` by ``angle`` radians.
    kind set_attribute: assign ``value`` to ``attribute``.
    """

    player_id: str
    kind: str
    coords: Optional[Tuple[float, ...]] = None
    anchor_id: Optional[str] = None
    angle: Optional[float] = None
    attribute: Optional[str] = None
    value: object = None

    def __post_init__(self):
        if self.kind not in PERTURBATION_KINDS:
            raise ContractViolationError(
                f"perturbation kind must be one of {PERTURBATION_KINDS}, "
                f"got {self.kind!r}"
            )
        if self.kind == "set_position" and self.coords is None:
            raise ContractViolationError("set_position needs coords")
        if self.kind == "circle_move":
            if self.anchor_id is None or self.angle is None:
                raise ContractViolationError("circle_move needs anchor_id and angle")
        if self.kind == "set_attribute":
            if self.attribute not in SETTABLE_ATTRIBUTES:
                raise ContractViolationError(
                    f"attribute must be one of {SETTABLE_ATTRIBUTES}, "
                    f"got {self.attribute!r}"
                )


def _replace_player(state: GameState, player_id: str,
                    new_player: PlayerRecord) -> GameState:
    found = False
    players = []
    for p in state.players:
        if p.player_id == player_id:
            players.append(new_player)
            found = True
        else:
            players.append(p)
    if not found:
        raise DataError(f"unknown player_id {player_id!r}")
    return replace(state, players=tuple(players))


def circle_move(state: GameState, player_id: str, anchor_id: str,
                angle: float) -> GameState:
    """Rotate a player about another player's position in the ground plane.

    The radius (and, for 3-D states, the z coordinate) is preserved.
    """
    if player_id == anchor_id:
        raise ContractViolationError("circle_move needs distinct player and anchor")
    player = state.player(player_id)
    anchor = state.player(anchor_id)
    dx = player.position[0] - anchor.position[0]
    dy = player.position[1] - anchor.position[1]
    if math.hypot(dx, dy) == 0.0:
        raise ContractViolationError(
            f"players {player_id!r} and {anchor_id!r} are coincident in the "
            "ground plane; the rotation radius is zero"
        )
    c, s = math.cos(angle), math.sin(angle)
    new_xy = (anchor.position[0] + dx * c - dy * s,
              anchor.position[1] + dx * s + dy * c)
    new_pos = new_xy + tuple(player.position[2:])
    return _replace_player(state, player_id,
                           replace(player, position=new_pos))


def apply_perturbation(state: GameState, p: Perturbation,
                       bounds: Optional[Tuple[float, float]] = None) -> GameState:
    """Return a new state with the perturbation applied.

    ``bounds`` (max_x, max_y), when given, rejects out-of-bounds target
    positions. Setting hp to 0 kills the player; setting hp above 0 on a
    dead player revives them, keeping the dead-implies-zero-hp invariant
    in both directions.
    """
    player = state.player(p.player_id)
    if p.kind == "circle_move":
        out = circle_move(state, p.player_id, p.anchor_id, p.angle)
        if bounds is not None:
            moved = out.player(p.player_id)
            _check_bounds(moved.position, bounds)
        return out
    if p.kind == "set_position":
        coords = tuple(float(c) for c in p.coords)
        if len(coords) != len(player.position):
            raise DataError(
                f"set_position expects {len(player.position)} coordinates, "
                f"got {len(coords)}"
            )
        if bounds is not None:
            _check_bounds(coords, bounds)
        return _replace_player(state, p.player_id,
                               replace(player, position=coords))
    # set_attribute
    name = p.attribute
    if name in _BOOL_ATTRS:
        value = bool(p.value)
    elif name in _INT_ATTRS:
        value = int(p.value)
    else:
        value = float(p.value)
        if not math.isfinite(value):
            raise DataError(f"attribute {name!r} must be finite")
    updated = replace(player, **{name: value})
    if name == "hp":
        if value == 0.0:
            updated = replace(updated, alive=False)
        elif value > 0.0 and not updated.alive:
            updated = replace(updated, alive=True)
        elif value < 0.0:
            raise DataError("hp must be >= 0")
    if name == "alive" and value is False:
        updated = replace(updated, hp=0.0)
    return _replace_player(state, p.player_id, updated)


def _check_bounds(coords: Sequence[float],
                  bounds: Tuple[float, float]) -> None:
    x, y = coords[0], coords[1]
    if not (0.0 <= x <= bounds[0] and 0.0 <= y <= bounds[1]):
        raise DataError(
            f"position ({x}, {y}) outside field bounds "
            f"(0..{bounds[0]}, 0..{bounds[1]})"
        )


@dataclass
class WhatIfResult:
    baseline: Prediction
    perturbed: Prediction
    delta: float
    perturbed_state: GameState
    expected_end_line: Optional[float]


def what_if(params: ModelParams, state: GameState, p: Perturbation,
            bounds: Optional[Tuple[float, float]] = None) -> WhatIfResult:
    """Predict before and after a perturbation; never mutates the input.

    For NFL regression models the result carries the expected ending yard
    line of the perturbed scenario: the carrier's x plus the predicted
    gain.
    """
    baseline = predict_state(params, state)
    perturbed_state = apply_perturbation(state, p, bounds=bounds)
    perturbed = predict_state(params, perturbed_state)
    end_line = None
    if state.sport() == SPORT_NFL and params.spec.task == "regression":
        end_line = perturbed_state.carrier().position[0] + perturbed.value
    return WhatIfResult(
        baseline=baseline,
        perturbed=perturbed,
        delta=perturbed.value - baseline.value,
        perturbed_state=perturbed_state,
        expected_end_line=end_line,
    )


# ---------------------------------------------------------------------------
# Attention introspection
# ---------------------------------------------------------------------------

@dataclass
class AttentionSummary:
    """Mean attention mass per source node, averaged over heads.

    mode "column" (default) reads entry (i, j) as the incoming weight of
    source j into receiver i and averages over receivers; mode "row"
    averages each receiver's outgoing row instead.
    """

    per_node: Dict[str, float]
    per_team: Dict[str, float]
    mode: str


def team_lookup(state: GameState) -> Dict[str, str]:
    return {p.player_id: p.team for p in state.players}


def attention_summary(prediction: Prediction,
                      teams: Optional[Mapping[str, str]] = None,
                      mode: str = "column") -> AttentionSummary:
    if prediction.attention is None:
        raise ContractViolationError(
            "prediction carries no attention matrices (non-attention variant)"
        )
    if mode not in ("column", "row"):
        raise ContractViolationError(f"unknown attention summary mode {mode!r}")
    axis = 0 if mode == "column" else 1
    stacked = np.stack(prediction.attention)            # (heads, N, N)
    per_source = stacked.mean(axis=0).mean(axis=axis)   # (N,)
    ids = prediction.node_order or tuple(
        str(i) for i in range(per_source.size))
    per_node = {pid: float(v) for pid, v in zip(ids, per_source)}
    per_team: Dict[str, float] = {}
    if teams:
        buckets: Dict[str, List[float]] = {}
        for pid, v in per_node.items():
            buckets.setdefault(teams.get(pid, "?"), []).append(v)
        per_team = {t: float(np.mean(vs)) for t, vs in buckets.items()}
    return AttentionSummary(per_node=per_node, per_team=per_team, mode=mode)


# ---------------------------------------------------------------------------
# Position sweeps
# ---------------------------------------------------------------------------

def make_grid(bounds: Tuple[float, float], nx: int, ny: int,
              margin: float = 0.5) -> List[Tuple[float, float]]:
    """Evenly spaced (x, y) lattice clamped inside the field bounds."""
    if nx < 1 or ny < 1:
        raise ContractViolationError("grid needs at least one cell per axis")
    xs = np.linspace(margin, bounds[0] - margin, nx)
    ys = np.linspace(margin, bounds[1] - margin, ny)
    return [(float(x), float(y)) for x in xs for y in ys]


def position_sweep(params: ModelParams, state: GameState, player_id: str,
                   grid: Sequence[Tuple[float, ...]],
                   bounds: Optional[Tuple[float, float]] = None
                   ) -> List[Tuple[Tuple[float, ...], float]]:
    """Evaluate a set_position what-if at every grid cell.

    Returns (coords, predicted value) pairs sorted by value descending,
    ties broken by grid order; each value is bitwise identical to the
    corresponding individual what_if call.
    """
    if not grid:
        raise ContractViolationError("position sweep needs a non-empty grid")
    player = state.player(player_id)
    keep_z = tuple(player.position[2:])
    results = []
    for i, cell in enumerate(grid):
        coords = tuple(float(c) for c in cell)
        if len(coords) == 2 and keep_z:
            coords = coords + keep_z
        try:
            r = what_if(params, state,
                        Perturbation(player_id=player_id, kind="set_position",
                                     coords=coords), bounds=bounds)
        except Exception as exc:
            raise type(exc)(f"sweep cell {i} at {coords}: {exc}") from exc
        results.append((coords, r.perturbed.value))
    order = sorted(range(len(results)),
                   key=lambda i: (-results[i][1], i))
    return [results[i] for i in order]


# ---------------------------------------------------------------------------
# Stable JSON field names shared by the CLI and the HTTP service
# ---------------------------------------------------------------------------

def prediction_to_dict(pred: Prediction) -> dict:
    return {
        "value": pred.value,
        "attention": ([a.tolist() for a in pred.attention]
                      if pred.attention is not None else None),
        "node_order": list(pred.node_order),
    }


def whatif_result_to_dict(result: WhatIfResult) -> dict:
    from .game import state_to_dict
    return {
        "baseline": prediction_to_dict(result.baseline),
        "perturbed": prediction_to_dict(result.perturbed),
        "delta": result.delta,
        "perturbed_state": state_to_dict(result.perturbed_state),
        "expected_end_line": result.expected_end_line,
    }
