import json
import math

import numpy as np
import pytest

from playgraph.errors import ContractViolationError, DataError, MissingConfigError
from playgraph.game import (
    CSGO_GLOBAL_NAMES,
    DEFAULT_CSGO_GEOMETRY,
    NFL_GLOBAL_NAMES,
    FeatureSchema,
    GameState,
    PlayerRecord,
    apply_node_filter,
    build_graph,
    featurize_csgo_nodes,
    featurize_csgo_state_vector,
    featurize_nfl_nodes,
    featurize_nfl_state_vector,
    infer_sport,
    load_states,
    player_from_dict,
    save_states,
    state_from_dict,
    state_to_dict,
    validate_state,
)


def nfl_player(pid, team, x, y, carrier=False, velocity=0.0):
    return PlayerRecord(player_id=pid, team=team, position=(x, y),
                        velocity=velocity, is_ball_carrier=carrier)


def make_nfl_state(carrier_xy=(40.0, 26.0)):
    players = [nfl_player("rb", "offense", *carrier_xy, carrier=True,
                          velocity=5.0)]
    for i in range(10):
        players.append(nfl_player(f"off-{i}", "offense", 30.0 + i, 10.0 + i))
    for i in range(11):
        players.append(nfl_player(f"def-{i}", "defense", 50.0 + i, 10.0 + 2 * i))
    return GameState(t=1.2, global_features=(2.0, 7.0), players=tuple(players))


def csgo_player(pid, team, x, y, z=0.0, hp=100.0, alive=True):
    return PlayerRecord(player_id=pid, team=team, position=(x, y, z),
                        hp=hp if alive else 0.0, alive=alive, armor=50.0,
                        equipment_value=3000.0, zone_id=2)


def make_csgo_state():
    players = [csgo_player(f"t-{i}", "T", 100.0 * i, 200.0) for i in range(5)]
    players += [csgo_player(f"ct-{i}", "CT", 300.0, 100.0 * i) for i in range(5)]
    return GameState(t=30.0, global_features=(20000.0, 21000.0, 3.0, 5.0, 0.0),
                     players=tuple(players), outcome=1.0)


def test_infer_sport():
    assert make_nfl_state().sport() == "nfl"
    assert make_csgo_state().sport() == "csgo"
    with pytest.raises(DataError):
        infer_sport((nfl_player("x", "mystery", 0, 0),))


def test_nfl_node_features_relative_to_carrier():
    state = make_nfl_state()
    X, schema = featurize_nfl_nodes(state)
    assert X.shape == (22, 10)
    names = [e.name for e in schema.entries]
    i_dx = names.index("dx_to_carrier")
    i_carrier = names.index("is_carrier")
    # carrier row: zero offsets, carrier flag set
    assert X[0, i_dx] == 0.0
    assert X[0, i_carrier] == 1.0
    assert X[1:, i_carrier].sum() == 0.0
    # a defender's offset is its position minus the carrier's
    d0 = state.players[11]
    assert X[11, i_dx] == pytest.approx(d0.position[0] - 40.0)


def test_nfl_state_vector_layout_and_sorting():
    state = make_nfl_state()
    vec, schema = featurize_nfl_state_vector(state)
    assert vec.shape == (15,)
    assert vec[0] == 2.0 and vec[1] == 7.0       # down, yards to go
    assert vec[2] == 5.0                          # carrier velocity
    dists = vec[4:]
    assert np.all(np.diff(dists) >= 0), "defender distances must be sorted"
    carrier = state.players[0]
    expect = sorted(math.dist(p.position, carrier.position)
                    for p in state.players if p.team == "defense")
    assert np.allclose(dists, expect)


def test_nfl_state_vector_requires_eleven_defenders():
    state = make_nfl_state()
    short = GameState(t=0.0, global_features=(1.0, 10.0),
                      players=state.players[:-1])
    with pytest.raises(DataError):
        featurize_nfl_state_vector(short)


def test_build_graph_constant_edges():
    g = build_graph(make_nfl_state(), "constant")
    assert g.edge_weights.shape == (22, 22)
    assert np.all(g.edge_weights == 1.0)
    assert g.node_order[0] == "rb"


def test_build_graph_inverse_distance_self_loops_are_one():
    g = build_graph(make_nfl_state(), "inverse_distance")
    assert np.allclose(np.diag(g.edge_weights), 1.0)
    # symmetric for symmetric distances, and decreasing in distance
    assert np.allclose(g.edge_weights, g.edge_weights.T)
    assert g.edge_weights.max() <= 1.0


def test_build_graph_inverse_distance_hand_value():
    players = (nfl_player("a", "offense", 0.0, 0.0, carrier=True),
               nfl_player("b", "defense", 3.0, 4.0))
    state = GameState(t=0.0, global_features=(1.0, 5.0), players=players)
    g = build_graph(state, "inverse_distance")
    assert g.edge_weights[0, 1] == pytest.approx(1.0 / 6.0)  # d = 5


def test_build_graph_unknown_mode():
    with pytest.raises(ContractViolationError):
        build_graph(make_nfl_state(), "gaussian")


def test_csgo_node_features_zone_one_hot():
    state = make_csgo_state()
    X, schema = featurize_csgo_nodes(state)
    zc = DEFAULT_CSGO_GEOMETRY.zone_count
    assert X.shape == (10, 13 + zc)
    names = [e.name for e in schema.entries]
    z2 = names.index("zone_2")
    assert np.all(X[:, z2] == 1.0)
    hot = X[:, names.index("zone_0"):]
    assert np.all(hot.sum(axis=1) == 1.0)


def test_csgo_nodes_need_geometry():
    state = make_csgo_state()
    with pytest.raises(MissingConfigError):
        featurize_csgo_nodes(state, geometry=None)


def test_csgo_state_vector_team_totals():
    state = make_csgo_state()
    vec, _ = featurize_csgo_state_vector(state)
    assert vec.shape == (12,)
    assert vec[5] == 500.0  # hp_total_t: five alive at 100
    assert vec[6] == 500.0


def test_apply_node_filter_keeps_carrier_and_defense():
    state = make_nfl_state()
    kept = apply_node_filter(state, "carrier_and_defense")
    assert len(kept.players) == 12
    assert sum(p.is_ball_carrier for p in kept.players) == 1
    assert all(p.team == "defense" or p.is_ball_carrier for p in kept.players)
    same = apply_node_filter(state, "none")
    assert same.players == state.players


def test_validate_state_flags_problems():
    state = make_nfl_state()
    assert validate_state(state) == []
    bad_players = list(state.players)
    bad_players[3] = PlayerRecord(player_id="off-7", team="offense",
                                  position=(10.0, 10.0))  # duplicates index 8
    bad = GameState(t=0.0, global_features=(1.0,), players=tuple(bad_players))
    problems = validate_state(bad)
    assert any("duplicate" in p for p in problems)
    assert any("global" in p for p in problems)


def test_validate_state_dead_player_with_hp():
    players = list(make_csgo_state().players)
    players[0] = PlayerRecord(player_id="t-0", team="T",
                              position=(0.0, 0.0, 0.0), hp=40.0, alive=False)
    bad = GameState(t=0.0, global_features=(0.0,) * 5, players=tuple(players),
                    outcome=1.0)
    assert any("dead" in p for p in validate_state(bad))


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------

def test_state_round_trip_exact():
    for state in (make_nfl_state(), make_csgo_state()):
        again = state_from_dict(state_to_dict(state))
        assert again == state


def test_player_from_dict_strict_rejects_unknown_keys():
    doc = {"player_id": "a", "team": "offense", "position": [1.0, 2.0],
           "jersey": 88}
    with pytest.raises(DataError, match="jersey"):
        player_from_dict(doc, strict=True)
    # non-strict tolerates and drops it
    p = player_from_dict(doc)
    assert p.player_id == "a"


def test_state_from_dict_names_the_offending_field():
    doc = state_to_dict(make_nfl_state())
    del doc["players"][4]["team"]
    with pytest.raises(DataError, match="team"):
        state_from_dict(doc)


def test_ndjson_round_trip(tmp_path, rush_states):
    path = tmp_path / "states.ndjson"
    save_states(rush_states[:7], path)
    lines = path.read_text().strip().split("\n")
    assert len(lines) == 7
    json.loads(lines[0])  # each line is standalone JSON
    back = load_states(path)
    assert back == rush_states[:7]


def test_load_states_reports_line_numbers(tmp_path):
    path = tmp_path / "bad.ndjson"
    good = json.dumps(state_to_dict(make_nfl_state()))
    path.write_text(good + "\n" + '{"t": 0}' + "\n")
    with pytest.raises(DataError, match="line 2"):
        load_states(path)


# ---------------------------------------------------------------------------
# feature schema
# ---------------------------------------------------------------------------

def plain_schema(*names):
    from playgraph.game import FeatureEntry
    return FeatureSchema(tuple(FeatureEntry(n, "units") for n in names))


def test_schema_normalize_centers_and_scales():
    schema = plain_schema("a", "b").fitted(np.array([[1.0, 10.0], [3.0, 30.0]]))
    z = schema.normalize(np.array([[2.0, 20.0]]))
    assert np.allclose(z, 0.0)


def test_schema_fitted_skips_flags():
    from playgraph.game import FeatureEntry
    entries = (FeatureEntry("x", "yards"), FeatureEntry("on", "flag"))
    X = np.array([[1.0, 1.0], [5.0, 0.0], [3.0, 1.0]])
    schema = FeatureSchema(entries).fitted(X)
    z = schema.normalize(X)
    assert set(np.unique(z[:, 1])) == {0.0, 1.0}, "flags must pass through"
    assert abs(z[:, 0].mean()) < 1e-12


def test_schema_constant_column_does_not_divide_by_zero():
    schema = plain_schema("k").fitted(np.full((4, 1), 7.0))
    z = schema.normalize(np.full((2, 1), 7.0))
    assert np.all(np.isfinite(z))


def test_schema_diff_reports_mismatch():
    a = plain_schema("x", "y")
    b = plain_schema("x", "z")
    assert a.diff(b)
    assert not a.diff(a)


def test_schema_dict_round_trip():
    schema = plain_schema("u", "v").fitted(np.array([[1.0, 2.0], [3.0, 4.0]]))
    again = FeatureSchema.from_dict(schema.to_dict())
    assert not schema.diff(again)
    assert np.allclose(again.normalize(np.array([[2.0, 3.0]])),
                       schema.normalize(np.array([[2.0, 3.0]])))
