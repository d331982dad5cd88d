import math

import numpy as np
import pytest

from playgraph.errors import ContractViolationError
from playgraph.game import GameState, PlayerRecord, validate_state
from playgraph.synth import (
    SYNTH_MAPS,
    RoundOracleWeights,
    RushOracleConstants,
    SyntheticConfig,
    gen_states,
    round_oracle_prob,
    rush_oracle_yards,
)


def rush_state_with_defenders(defenders, carrier_velocity=4.0):
    """22-player state: carrier at (40, 26), defenders at given spots,
    remaining players parked far behind where they cannot affect the oracle."""
    players = [PlayerRecord("rb", "offense", (40.0, 26.0),
                            velocity=carrier_velocity, is_ball_carrier=True)]
    for i in range(10):
        players.append(PlayerRecord(f"off-{i}", "offense", (5.0 + i, 5.0)))
    for i, pos in enumerate(defenders):
        players.append(PlayerRecord(f"def-{i}", "defense", pos))
    for i in range(len(defenders), 11):
        players.append(PlayerRecord(f"def-{i}", "defense", (1.0, 50.0 - i)))
    return GameState(t=0.0, global_features=(1.0, 10.0),
                     players=tuple(players))


# ---------------------------------------------------------------------------
# rush oracle, hand-computed cases
# ---------------------------------------------------------------------------

def test_rush_oracle_single_defender_ahead():
    # d_front 5, no close defenders: 0.8*5 + 0.5*4 = 6
    state = rush_state_with_defenders([(45.0, 26.0)])
    assert rush_oracle_yards(state) == pytest.approx(6.0, abs=1e-12)


def test_rush_oracle_defender_behind_is_ignored_by_cone():
    # defender straight behind: cone empty, capped at 25
    state = rush_state_with_defenders([(35.0, 26.0)])
    assert rush_oracle_yards(state) == 25.0


def test_rush_oracle_cone_boundary_inclusive():
    # dx = dy = 3: exactly 45 degrees, inside; d = 3*sqrt(2) > close radius
    state = rush_state_with_defenders([(43.0, 29.0)])
    expect = 0.8 * 3.0 * math.sqrt(2.0) + 0.5 * 4.0
    assert rush_oracle_yards(state) == pytest.approx(expect, abs=1e-12)


def test_rush_oracle_just_outside_cone():
    # dy slightly larger than dx: excluded
    state = rush_state_with_defenders([(43.0, 29.01)])
    assert rush_oracle_yards(state) == 25.0


def test_rush_oracle_close_defender_penalty():
    # ahead at d 2: in cone and close. 0.8*2 + 0.5*4 - 1 = 2.6
    state = rush_state_with_defenders([(42.0, 26.0)])
    assert rush_oracle_yards(state) == pytest.approx(2.6, abs=1e-12)


def test_rush_oracle_close_radius_inclusive():
    # defender behind at exactly 3 yards: close, not in cone
    far_ahead = (80.0, 26.0)  # keeps the cone finite without being near
    state = rush_state_with_defenders([(37.0, 26.0), far_ahead])
    # d_front 40, n_close 1: 0.8*40 + 2 - 1 = 33 -> capped
    assert rush_oracle_yards(state) == 25.0
    tighter = rush_state_with_defenders([(37.0, 26.0), (44.0, 26.0)])
    # d_front 4, n_close 1: 3.2 + 2 - 1 = 4.2
    assert rush_oracle_yards(tighter) == pytest.approx(4.2, abs=1e-12)


def test_rush_oracle_clamps_at_zero():
    state = rush_state_with_defenders(
        [(40.5, 26.0), (40.0, 27.0), (40.0, 25.0)], carrier_velocity=0.0)
    # d_front 0.5, n_close 3: 0.4 - 3 < 0
    assert rush_oracle_yards(state) == 0.0


def test_rush_oracle_custom_constants():
    state = rush_state_with_defenders([(45.0, 26.0)])
    constants = RushOracleConstants(alpha=1.0, beta=0.0, gamma=0.0, cap=100.0)
    assert rush_oracle_yards(state, constants) == pytest.approx(5.0)


# ---------------------------------------------------------------------------
# round oracle
# ---------------------------------------------------------------------------

def csgo_state(t_alive=5, ct_alive=5, hp_each=100.0, eq_each=0.0):
    players = []
    for i in range(5):
        alive = i < t_alive
        players.append(PlayerRecord(
            f"t-{i}", "T", (1000.0, 1000.0, 0.0),
            hp=hp_each if alive else 0.0, alive=alive,
            equipment_value=eq_each if alive else 0.0))
    for i in range(5):
        alive = i < ct_alive
        players.append(PlayerRecord(
            f"ct-{i}", "CT", (1000.0, 1000.0, 0.0),
            hp=hp_each if alive else 0.0, alive=alive,
            equipment_value=eq_each if alive else 0.0))
    return GameState(t=30.0, global_features=(0.0,) * 5,
                     players=tuple(players))


def test_round_oracle_symmetric_state_is_even():
    assert round_oracle_prob(csgo_state()) == pytest.approx(0.5, abs=1e-12)


def test_round_oracle_all_t_dead_is_near_certain():
    p = round_oracle_prob(csgo_state(t_alive=0))
    assert p >= 0.95


def test_round_oracle_all_ct_dead_mirrors():
    p = round_oracle_prob(csgo_state(ct_alive=0))
    assert p <= 0.05


def test_round_oracle_hand_value():
    # one T down, everything else symmetric:
    # z = 0.9*1 + 0.4*(100/100) + 0 + site term (equidistant -> tanh(d/500)?)
    # players sit at the same spot so site control is 0 until a side is empty
    state = csgo_state(t_alive=4)
    z = 0.9 * 1.0 + 0.4 * (500.0 - 400.0) / 100.0
    assert round_oracle_prob(state) == pytest.approx(1.0 / (1.0 + math.exp(-z)),
                                                     abs=1e-12)


def test_round_oracle_equipment_term():
    base = csgo_state()
    richer = []
    for p in base.players:
        if p.team == "CT":
            richer.append(PlayerRecord(p.player_id, p.team, p.position,
                                       hp=p.hp, alive=p.alive,
                                       equipment_value=2000.0))
        else:
            richer.append(p)
    state = GameState(t=30.0, global_features=(0.0,) * 5,
                      players=tuple(richer))
    z = 0.3 * (5 * 2000.0) / 1000.0
    assert round_oracle_prob(state) == pytest.approx(1.0 / (1.0 + math.exp(-z)),
                                                     abs=1e-12)


# ---------------------------------------------------------------------------
# generators
# ---------------------------------------------------------------------------

def test_gen_rush_is_deterministic_and_valid():
    cfg = SyntheticConfig(seed=5, n_states=25, task="rush")
    a = gen_states(cfg)
    b = gen_states(cfg)
    assert a == b
    assert len(a) == 25
    for s in a:
        assert validate_state(s) == []
        assert s.outcome is not None and 0.0 <= s.outcome <= 25.0
        assert s.partition_key.startswith("play-")


def test_gen_rush_noiseless_labels_match_oracle():
    cfg = SyntheticConfig(seed=8, n_states=30, task="rush", noise_std=0.0)
    for s in gen_states(cfg):
        assert s.outcome == pytest.approx(rush_oracle_yards(s), abs=1e-12)


def test_gen_rush_noise_changes_labels_not_positions():
    quiet = gen_states(SyntheticConfig(seed=9, n_states=10, task="rush"))
    noisy = gen_states(SyntheticConfig(seed=9, n_states=10, task="rush",
                                       noise_std=2.0))
    for a, b in zip(quiet, noisy):
        assert a.players == b.players
        assert a.outcome != b.outcome


def test_gen_round_outcomes_are_binary_and_keyed_by_map():
    cfg = SyntheticConfig(seed=6, n_states=40, task="round")
    states = gen_states(cfg)
    assert len(states) == 40
    maps = set()
    for s in states:
        assert validate_state(s) == []
        assert s.outcome in (0.0, 1.0)
        map_name = s.partition_key.split(":")[0]
        maps.add(map_name)
    assert maps <= set(SYNTH_MAPS)
    assert len(maps) > 1


def test_gen_round_outcome_rate_tracks_oracle():
    # with many rounds the empirical CT win rate should sit near the mean
    # oracle probability (binomial noise at n=400 stays within ~0.08)
    states = gen_states(SyntheticConfig(seed=13, n_states=400, task="round"))
    mean_p = float(np.mean([round_oracle_prob(s) for s in states]))
    rate = float(np.mean([s.outcome for s in states]))
    assert abs(rate - mean_p) < 0.08


def test_interaction_strength_moves_defenders_closer():
    def mean_near(states):
        total = 0
        for s in states:
            c = s.carrier()
            for p in s.players:
                if p.team == "defense" and math.dist(p.position, c.position) <= 12.0:
                    total += 1
        return total / len(states)

    weak = gen_states(SyntheticConfig(seed=3, n_states=80, task="rush",
                                      interaction_strength=0.0))
    strong = gen_states(SyntheticConfig(seed=3, n_states=80, task="rush",
                                        interaction_strength=1.0))
    assert mean_near(strong) > mean_near(weak) + 1.0


def test_config_rejects_bad_values():
    with pytest.raises(ContractViolationError):
        SyntheticConfig(seed=1, n_states=-5, task="rush")
    with pytest.raises(ContractViolationError):
        SyntheticConfig(seed=1, n_states=5, task="golf")
    with pytest.raises(ContractViolationError):
        SyntheticConfig(seed=1, n_states=5, task="rush", noise_std=-1.0)


def test_round_weights_do_not_leak_between_configs():
    w = RoundOracleWeights(w_alive=5.0)
    cfg = SyntheticConfig(seed=1, n_states=4, task="round", round_weights=w)
    default_cfg = SyntheticConfig(seed=1, n_states=4, task="round")
    assert default_cfg.round_weights.w_alive == 0.9
    assert cfg.round_weights.w_alive == 5.0
