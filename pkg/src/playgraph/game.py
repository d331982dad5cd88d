"""Game-state domain model, graph construction, and sport featurizers.

A game state is a global feature vector plus an unordered set of player
records. Graphs are fully connected over players (self-loops included) with
either constant edges or raw inverse-distance weights 1/(1+d); normalization
to row-stochastic form is deferred to the model.

File format (see SCHEMA.md): newline-delimited JSON, one state per line.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field, replace
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .errors import ContractViolationError, DataError, MissingConfigError

log = logging.getLogger("playgraph")

SPORT_NFL = "nfl"
SPORT_CSGO = "csgo"

NFL_TEAMS = ("offense", "defense")
CSGO_TEAMS = ("T", "CT")

NFL_PLAYER_COUNT = 22
CSGO_PLAYER_COUNT = 10

# NFL global feature order; CSGO global order. Documented in SCHEMA.md.
NFL_GLOBAL_NAMES = ("down", "yards_to_go")
CSGO_GLOBAL_NAMES = ("eq_start_t", "eq_start_ct", "score_t", "score_ct",
                     "bomb_planted")

NFL_FIELD_LENGTH = 120.0
NFL_FIELD_WIDTH = 53.3

EDGE_CONSTANT = "constant"
EDGE_INVERSE_DISTANCE = "inverse_distance"

PLAYER_FIELDS = (
    "player_id", "team", "position", "velocity", "displacement", "alive",
    "is_ball_carrier", "hp", "armor", "equipment_value", "grenades",
    "has_helmet", "has_defuse_kit", "zone_id",
)

STATE_FIELDS = ("t", "global", "players", "outcome", "partition_key")


@dataclass(frozen=True)
class PlayerRecord:
    """One player's slice of a game state.

    NFL records use 2-D positions in yards; CSGO records use 3-D positions
    in game units plus the hp/armor/equipment block.
    """

    player_id: str
    team: str
    position: Tuple[float, ...]
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


@dataclass(frozen=True)
class GameState:
    """Snapshot of all global and per-player information at one instant."""

    t: float
    global_features: Tuple[float, ...]
    players: Tuple[PlayerRecord, ...]
    outcome: Optional[float] = None
    partition_key: str = ""

    def sport(self) -> str:
        return infer_sport(self.players)

    def player(self, player_id: str) -> PlayerRecord:
        for p in self.players:
            if p.player_id == player_id:
                return p
        raise DataError(f"unknown player_id {player_id!r}")

    def carrier(self) -> PlayerRecord:
        carriers = [p for p in self.players if p.is_ball_carrier]
        if len(carriers) != 1:
            raise DataError(
                f"state must have exactly one ball-carrier, found {len(carriers)}"
            )
        return carriers[0]


@dataclass(frozen=True)
class FeatureEntry:
    name: str
    unit: str
    mean: float = 0.0
    std: float = 1.0


@dataclass(frozen=True)
class FeatureSchema:
    """Ordered feature list with z-score normalization statistics.

    The stats map raw values to normalized ones; applying ``normalize``
    twice therefore double-normalizes. Stats must be fitted on the training
    split only. Flag and one-hot features (unit == "flag") keep identity
    stats when fitting.
    """

    entries: Tuple[FeatureEntry, ...]

    def __len__(self):
        return len(self.entries)

    def names(self) -> Tuple[str, ...]:
        return tuple(e.name for e in self.entries)

    def normalize(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        means = np.array([e.mean for e in self.entries])
        stds = np.array([e.std for e in self.entries])
        if X.shape[-1] != len(self.entries):
            raise DataError(
                f"feature count {X.shape[-1]} != schema length {len(self.entries)}"
            )
        return (X - means) / stds

    def fitted(self, rows: np.ndarray) -> "FeatureSchema":
        """New schema with mean/std computed from training rows.

        ``rows`` is (n, F) with one row per observation (players are rows
        for node schemas). Constant columns keep std 1 to stay invertible.
        """
        rows = np.asarray(rows, dtype=np.float64)
        if rows.ndim != 2 or rows.shape[1] != len(self.entries):
            raise DataError(
                f"fit rows shape {rows.shape} incompatible with schema "
                f"length {len(self.entries)}"
            )
        fitted = []
        for i, e in enumerate(self.entries):
            if e.unit == "flag":
                fitted.append(FeatureEntry(e.name, e.unit, 0.0, 1.0))
                continue
            mu = float(rows[:, i].mean())
            sd = float(rows[:, i].std())
            fitted.append(FeatureEntry(e.name, e.unit, mu, sd if sd > 0 else 1.0))
        return FeatureSchema(tuple(fitted))

    def diff(self, other: "FeatureSchema") -> List[str]:
        """Human-readable differences in feature names/order, for refusals."""
        problems = []
        if len(self) != len(other):
            problems.append(f"feature count {len(self)} vs {len(other)}")
        for i, (a, b) in enumerate(zip(self.entries, other.entries)):
            if a.name != b.name:
                problems.append(f"feature {i}: {a.name!r} vs {b.name!r}")
        return problems

    def to_dict(self) -> dict:
        return {"entries": [
            {"name": e.name, "unit": e.unit, "mean": e.mean, "std": e.std}
            for e in self.entries
        ]}

    @classmethod
    def from_dict(cls, d: dict) -> "FeatureSchema":
        return cls(tuple(
            FeatureEntry(e["name"], e["unit"], float(e["mean"]), float(e["std"]))
            for e in d["entries"]
        ))


@dataclass(frozen=True)
class GameGraph:
    """Fully-connected player graph with recorded materialization order."""

    node_features: np.ndarray     # (N, F), raw (unnormalized)
    edge_weights: np.ndarray      # (N, N), self-loop diagonal > 0
    edge_mode: str
    node_order: Tuple[str, ...]
    schema: FeatureSchema


@dataclass(frozen=True)
class CsgoMapGeometry:
    """Reference coordinates for the synthetic CSGO map."""

    bombsite_a: Optional[Tuple[float, float, float]] = (400.0, 1600.0, 0.0)
    bombsite_b: Optional[Tuple[float, float, float]] = (1600.0, 400.0, 0.0)
    zone_count: int = 8
    bounds: Tuple[float, float] = (2000.0, 2000.0)


DEFAULT_CSGO_GEOMETRY = CsgoMapGeometry()


def infer_sport(players: Sequence[PlayerRecord]) -> str:
    if not players:
        raise DataError("state has no players")
    teams = {p.team for p in players}
    if teams <= set(NFL_TEAMS):
        return SPORT_NFL
    if teams <= set(CSGO_TEAMS):
        return SPORT_CSGO
    raise DataError(f"mixed or unknown team labels: {sorted(teams)}")


def _distance(a: Sequence[float], b: Sequence[float]) -> float:
    acc = 0.0
    for x, y in zip(a, b):
        d = x - y
        acc += d * d
    return math.sqrt(acc)


# ---------------------------------------------------------------------------
# Graph construction
# ---------------------------------------------------------------------------

def build_graph(state: GameState, mode: str = EDGE_CONSTANT,
                literal_inverse: bool = False,
                literal_eps: float = 1e-6) -> GameGraph:
    """Fully-connected graph over all players, self-loops included.

    Constant mode sets every edge to 1. Inverse-distance mode uses the
    bounded form 1/(1+d) by default; ``literal_inverse`` switches to
    1/max(d, eps), which blows up for co-located players.
    """
    if len(state.players) < 1:
        raise DataError("cannot build a graph from zero players")
    for p in state.players:
        if not all(math.isfinite(c) for c in p.position):
            raise DataError(f"player {p.player_id!r} has non-finite coordinates")
    sport = state.sport()
    if sport == SPORT_NFL:
        nodes, schema = featurize_nfl_nodes(state)
    else:
        nodes, schema = featurize_csgo_nodes(state)
    n = len(state.players)
    if mode == EDGE_CONSTANT:
        edges = np.ones((n, n))
    elif mode == EDGE_INVERSE_DISTANCE:
        edges = np.empty((n, n))
        for i, pi in enumerate(state.players):
            for j, pj in enumerate(state.players):
                d = _distance(pi.position, pj.position)
                if literal_inverse:
                    edges[i, j] = 1.0 / max(d, literal_eps)
                else:
                    edges[i, j] = 1.0 / (1.0 + d)
    else:
        raise ContractViolationError(f"unknown edge mode {mode!r}")
    order = tuple(p.player_id for p in state.players)
    return GameGraph(node_features=nodes, edge_weights=edges, edge_mode=mode,
                     node_order=order, schema=schema)


# ---------------------------------------------------------------------------
# NFL featurizers
# ---------------------------------------------------------------------------

_NFL_NODE_ENTRIES = (
    FeatureEntry("x", "yards"),
    FeatureEntry("y", "yards"),
    FeatureEntry("velocity", "yards_per_s"),
    FeatureEntry("displacement", "yards"),
    FeatureEntry("dx_to_carrier", "yards"),
    FeatureEntry("dy_to_carrier", "yards"),
    FeatureEntry("dspeed_to_carrier", "yards_per_s"),
    FeatureEntry("mean_dist_others", "yards"),
    FeatureEntry("is_offense", "flag"),
    FeatureEntry("is_carrier", "flag"),
)


def featurize_nfl_nodes(state: GameState) -> Tuple[np.ndarray, FeatureSchema]:
    """Per-player node features relative to the ball-carrier.

    Columns: x, y, velocity, displacement, dx/dy/dspeed to the carrier,
    mean distance to the other players, offense flag, carrier flag.
    """
    carrier = state.carrier()
    players = state.players
    n = len(players)
    X = np.zeros((n, len(_NFL_NODE_ENTRIES)))
    for i, p in enumerate(players):
        if len(p.position) != 2:
            raise DataError(f"NFL player {p.player_id!r} needs a 2-D position")
        dists = [_distance(p.position, q.position)
                 for j, q in enumerate(players) if j != i]
        mean_dist = sum(dists) / len(dists) if dists else 0.0
        X[i] = (
            p.position[0],
            p.position[1],
            p.velocity,
            p.displacement,
            p.position[0] - carrier.position[0],
            p.position[1] - carrier.position[1],
            p.velocity - carrier.velocity,
            mean_dist,
            1.0 if p.team == "offense" else 0.0,
            1.0 if p.is_ball_carrier else 0.0,
        )
    return X, FeatureSchema(_NFL_NODE_ENTRIES)


_NFL_STATE_ENTRIES = tuple(
    [FeatureEntry("down", "count"),
     FeatureEntry("yards_to_go", "yards"),
     FeatureEntry("carrier_velocity", "yards_per_s"),
     FeatureEntry("carrier_displacement", "yards")]
    + [FeatureEntry(f"defender_dist_{i + 1}", "yards") for i in range(11)]
)


def featurize_nfl_state_vector(state: GameState) -> Tuple[np.ndarray, FeatureSchema]:
    """Baseline vector: globals, carrier kinematics, and the sorted
    ascending distances of the 11 defenders to the carrier."""
    carrier = state.carrier()
    defenders = [p for p in state.players if p.team == "defense"]
    if len(defenders) != 11:
        raise DataError(f"NFL state vector needs 11 defenders, found {len(defenders)}")
    if len(state.global_features) != len(NFL_GLOBAL_NAMES):
        raise DataError(
            f"NFL global vector needs {len(NFL_GLOBAL_NAMES)} entries "
            f"({', '.join(NFL_GLOBAL_NAMES)}), got {len(state.global_features)}"
        )
    dists = sorted(_distance(d.position, carrier.position) for d in defenders)
    vec = np.array(list(state.global_features)
                   + [carrier.velocity, carrier.displacement] + dists)
    return vec, FeatureSchema(_NFL_STATE_ENTRIES)


# ---------------------------------------------------------------------------
# CSGO featurizers
# ---------------------------------------------------------------------------

def _csgo_node_entries(zone_count: int) -> Tuple[FeatureEntry, ...]:
    return tuple(
        [FeatureEntry("x", "units"),
         FeatureEntry("y", "units"),
         FeatureEntry("z", "units"),
         FeatureEntry("hp", "hp"),
         FeatureEntry("armor", "armor"),
         FeatureEntry("equipment_value", "dollars"),
         FeatureEntry("grenades", "count"),
         FeatureEntry("dist_bombsite_a", "units"),
         FeatureEntry("dist_bombsite_b", "units"),
         FeatureEntry("is_ct", "flag"),
         FeatureEntry("alive", "flag"),
         FeatureEntry("has_helmet", "flag"),
         FeatureEntry("has_defuse_kit", "flag")]
        + [FeatureEntry(f"zone_{z}", "flag") for z in range(zone_count)]
    )


def featurize_csgo_nodes(state: GameState,
                         geometry: Optional[CsgoMapGeometry] = DEFAULT_CSGO_GEOMETRY,
                         ) -> Tuple[np.ndarray, FeatureSchema]:
    """Per-player features: position, hp/armor/equipment, bombsite
    distances, side/alive/helmet/kit flags, and a zone one-hot."""
    if geometry is None or geometry.bombsite_a is None or geometry.bombsite_b is None:
        raise MissingConfigError("CSGO featurizer needs bombsite reference "
                                 "coordinates in the map geometry config")
    entries = _csgo_node_entries(geometry.zone_count)
    players = state.players
    X = np.zeros((len(players), len(entries)))
    for i, p in enumerate(players):
        if len(p.position) != 3:
            raise DataError(f"CSGO player {p.player_id!r} needs a 3-D position")
        if not 0 <= p.zone_id < geometry.zone_count:
            raise DataError(
                f"player {p.player_id!r} zone_id {p.zone_id} outside "
                f"[0, {geometry.zone_count})"
            )
        row = [
            p.position[0], p.position[1], p.position[2],
            p.hp, p.armor, p.equipment_value, p.grenades,
            _distance(p.position, geometry.bombsite_a),
            _distance(p.position, geometry.bombsite_b),
            1.0 if p.team == "CT" else 0.0,
            1.0 if p.alive else 0.0,
            1.0 if p.has_helmet else 0.0,
            1.0 if p.has_defuse_kit else 0.0,
        ] + [0.0] * geometry.zone_count
        row[13 + p.zone_id] = 1.0
        X[i] = row
    return X, FeatureSchema(entries)


_CSGO_STATE_ENTRIES = (
    FeatureEntry("time", "seconds"),
    FeatureEntry("eq_start_t", "dollars"),
    FeatureEntry("eq_start_ct", "dollars"),
    FeatureEntry("eq_current_t", "dollars"),
    FeatureEntry("eq_current_ct", "dollars"),
    FeatureEntry("hp_total_t", "hp"),
    FeatureEntry("hp_total_ct", "hp"),
    FeatureEntry("armor_total_t", "armor"),
    FeatureEntry("armor_total_ct", "armor"),
    FeatureEntry("score_t", "count"),
    FeatureEntry("score_ct", "count"),
    FeatureEntry("bomb_planted", "flag"),
)


def featurize_csgo_state_vector(state: GameState) -> Tuple[np.ndarray, FeatureSchema]:
    """Baseline vector: time, per-side equipment/HP/armor aggregates,
    scores, and the bomb flag. Aggregates sum over all player records."""
    if len(state.global_features) != len(CSGO_GLOBAL_NAMES):
        raise DataError(
            f"CSGO global vector needs {len(CSGO_GLOBAL_NAMES)} entries "
            f"({', '.join(CSGO_GLOBAL_NAMES)}), got {len(state.global_features)}"
        )
    eq_start_t, eq_start_ct, score_t, score_ct, bomb = state.global_features
    sides = {"T": [0.0, 0.0, 0.0], "CT": [0.0, 0.0, 0.0]}  # eq, hp, armor
    for p in state.players:
        acc = sides[p.team]
        acc[0] += p.equipment_value
        acc[1] += p.hp
        acc[2] += p.armor
    vec = np.array([
        state.t,
        eq_start_t, eq_start_ct,
        sides["T"][0], sides["CT"][0],
        sides["T"][1], sides["CT"][1],
        sides["T"][2], sides["CT"][2],
        score_t, score_ct,
        bomb,
    ])
    return vec, FeatureSchema(_CSGO_STATE_ENTRIES)


def featurize_nodes(state: GameState) -> Tuple[np.ndarray, FeatureSchema]:
    if state.sport() == SPORT_NFL:
        return featurize_nfl_nodes(state)
    return featurize_csgo_nodes(state)


def featurize_state_vector(state: GameState) -> Tuple[np.ndarray, FeatureSchema]:
    if state.sport() == SPORT_NFL:
        return featurize_nfl_state_vector(state)
    return featurize_csgo_state_vector(state)


def apply_node_filter(state: GameState, node_filter: str) -> GameState:
    """Restrict the player set before graph construction.

    ``carrier_and_defense`` keeps the ball-carrier plus all defenders
    (the reduced-graph ablation); ``none`` is the identity.
    """
    if node_filter in ("", "none", None):
        return state
    if node_filter == "carrier_and_defense":
        kept = tuple(p for p in state.players
                     if p.is_ball_carrier or p.team == "defense")
        return replace(state, players=kept)
    raise ContractViolationError(f"unknown node filter {node_filter!r}")


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------

def validate_state(state: GameState) -> List[str]:
    """Return a list of diagnostics; an empty list means the state is valid."""
    problems: List[str] = []
    if not state.players:
        return ["state has no players"]
    try:
        sport = state.sport()
    except DataError as exc:
        return [str(exc)]

    if not math.isfinite(state.t):
        problems.append("t is not finite")
    for g in state.global_features:
        if not math.isfinite(g):
            problems.append("global features contain non-finite values")
            break
    if state.outcome is not None and not math.isfinite(state.outcome):
        problems.append("outcome is not finite")

    ids = [p.player_id for p in state.players]
    if len(set(ids)) != len(ids):
        problems.append("duplicate player_id values")

    dim = 2 if sport == SPORT_NFL else 3
    for p in state.players:
        if len(p.position) != dim:
            problems.append(
                f"player {p.player_id!r}: position must be {dim}-D for {sport}"
            )
        if not all(math.isfinite(c) for c in p.position):
            problems.append(f"player {p.player_id!r}: non-finite position")
        for name in ("velocity", "displacement", "hp", "armor",
                     "equipment_value", "grenades"):
            if not math.isfinite(getattr(p, name)):
                problems.append(f"player {p.player_id!r}: non-finite {name}")
        if p.hp < 0:
            problems.append(f"player {p.player_id!r}: hp must be >= 0")
        if not p.alive and p.hp != 0:
            problems.append(f"player {p.player_id!r}: dead players must have hp 0")

    n = len(state.players)
    if sport == SPORT_NFL:
        if n != NFL_PLAYER_COUNT:
            problems.append(
                f"NFL states require exactly {NFL_PLAYER_COUNT} players, found {n}"
            )
        carriers = sum(1 for p in state.players if p.is_ball_carrier)
        if carriers != 1:
            problems.append(
                f"NFL states require exactly one ball-carrier, found {carriers}"
            )
        if len(state.global_features) != len(NFL_GLOBAL_NAMES):
            problems.append(
                f"NFL global vector must have {len(NFL_GLOBAL_NAMES)} entries"
            )
    else:
        if n != CSGO_PLAYER_COUNT:
            problems.append(
                f"CSGO states require exactly {CSGO_PLAYER_COUNT} players, found {n}"
            )
        if any(p.is_ball_carrier for p in state.players):
            problems.append("CSGO states cannot have a ball-carrier")
        if len(state.global_features) != len(CSGO_GLOBAL_NAMES):
            problems.append(
                f"CSGO global vector must have {len(CSGO_GLOBAL_NAMES)} entries"
            )
        if state.outcome is not None and state.outcome not in (0.0, 1.0):
            problems.append("CSGO outcome must be 0 or 1")
    return problems


# ---------------------------------------------------------------------------
# Serialization (newline-delimited JSON)
# ---------------------------------------------------------------------------

def player_to_dict(p: PlayerRecord) -> dict:
    return {
        "player_id": p.player_id,
        "team": p.team,
        "position": list(p.position),
        "velocity": p.velocity,
        "displacement": p.displacement,
        "alive": p.alive,
        "is_ball_carrier": p.is_ball_carrier,
        "hp": p.hp,
        "armor": p.armor,
        "equipment_value": p.equipment_value,
        "grenades": p.grenades,
        "has_helmet": p.has_helmet,
        "has_defuse_kit": p.has_defuse_kit,
        "zone_id": p.zone_id,
    }


def player_from_dict(d: dict, strict: bool = False, where: str = "") -> PlayerRecord:
    unknown = set(d) - set(PLAYER_FIELDS)
    if unknown:
        msg = f"{where}: unknown player keys {sorted(unknown)}"
        if strict:
            raise DataError(msg)
        log.warning("%s (ignored)", msg)
    for req in ("player_id", "team", "position"):
        if req not in d:
            raise DataError(f"{where}: missing player field {req!r}")
    try:
        return PlayerRecord(
            player_id=str(d["player_id"]),
            team=str(d["team"]),
            position=tuple(float(c) for c in d["position"]),
            velocity=float(d.get("velocity", 0.0)),
            displacement=float(d.get("displacement", 0.0)),
            alive=bool(d.get("alive", True)),
            is_ball_carrier=bool(d.get("is_ball_carrier", False)),
            hp=float(d.get("hp", 0.0)),
            armor=float(d.get("armor", 0.0)),
            equipment_value=float(d.get("equipment_value", 0.0)),
            grenades=float(d.get("grenades", 0.0)),
            has_helmet=bool(d.get("has_helmet", False)),
            has_defuse_kit=bool(d.get("has_defuse_kit", False)),
            zone_id=int(d.get("zone_id", 0)),
        )
    except (TypeError, ValueError) as exc:
        raise DataError(f"{where}: bad player field value ({exc})") from exc


def state_to_dict(state: GameState) -> dict:
    return {
        "t": state.t,
        "global": list(state.global_features),
        "players": [player_to_dict(p) for p in state.players],
        "outcome": state.outcome,
        "partition_key": state.partition_key,
    }


def state_from_dict(d: dict, strict: bool = False, where: str = "state") -> GameState:
    unknown = set(d) - set(STATE_FIELDS)
    if unknown:
        msg = f"{where}: unknown state keys {sorted(unknown)}"
        if strict:
            raise DataError(msg)
        log.warning("%s (ignored)", msg)
    for req in ("t", "global", "players"):
        if req not in d:
            raise DataError(f"{where}: missing state field {req!r}")
    try:
        globals_ = tuple(float(g) for g in d["global"])
        t = float(d["t"])
    except (TypeError, ValueError) as exc:
        raise DataError(f"{where}: bad global/t value ({exc})") from exc
    players = tuple(
        player_from_dict(p, strict=strict, where=f"{where}, player {i}")
        for i, p in enumerate(d["players"])
    )
    outcome = d.get("outcome")
    if outcome is not None:
        outcome = float(outcome)
    return GameState(t=t, global_features=globals_, players=players,
                     outcome=outcome, partition_key=str(d.get("partition_key", "")))


def save_states(states: Iterable[GameState], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for s in states:
            fh.write(json.dumps(state_to_dict(s)) + "\n")


def load_states(path, strict: bool = False, validate: bool = True) -> List[GameState]:
    """Parse a newline-delimited JSON state file, order-preserving.

    Raises DataError naming the offending line and field for malformed
    records; invalid states (wrong counts, non-finite numbers) fail
    validation with the rule named in the message.
    """
    states: List[GameState] = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                raw = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(f"line {lineno}: invalid JSON ({exc})") from exc
            state = state_from_dict(raw, strict=strict, where=f"line {lineno}")
            if validate:
                problems = validate_state(state)
                if problems:
                    raise DataError(f"line {lineno}: " + "; ".join(problems))
            states.append(state)
    return states
