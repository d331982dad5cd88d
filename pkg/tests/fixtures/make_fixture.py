"""Regenerate the trained fixture checkpoint and its golden values.

Run from the repository root:

    python3 tests/fixtures/make_fixture.py

Produces, next to this script:
  fixture_model.ckpt   small trained graph-attention + state model (rush task)
  fixture_state.json   one held-out game state the goldens refer to
  golden.json          frozen prediction and counterfactual values

Everything is seeded, so reruns are byte-identical. The goldens pin model
behavior: tests compare live computation against these frozen numbers.
"""

import json
import os

import numpy as np

from playgraph.game import state_to_dict
from playgraph.models import ModelSpec, predict_state, save_checkpoint
from playgraph.synth import SyntheticConfig, gen_states
from playgraph.training import SplitConfig, TrainConfig, split_dataset, train_model
from playgraph.whatif import Perturbation, circle_move, what_if

HERE = os.path.dirname(os.path.abspath(__file__))

DATASET = SyntheticConfig(seed=21, n_states=400, task="rush")
SPEC = ModelSpec(variant="gat_state", task="regression",
                 hidden_state=16, hidden_graph=8, heads=2, seed=9)
TRAINING = TrainConfig(epochs=40, lr=3e-3, batch_size=32, patience=40)
ANGLE_RAD = 2.2


def main() -> None:
    states = gen_states(DATASET)
    train, val, test = split_dataset(states, SplitConfig(seed=2))
    params, history = train_model(SPEC, train, val, TRAINING)
    save_checkpoint(params, os.path.join(HERE, "fixture_model.ckpt"))

    # pick a held-out state whose carrier-anchored defender rotation moves
    # the prediction by a comfortable margin
    chosen = None
    for state in test:
        carrier = state.carrier()
        defenders = sorted((p for p in state.players if p.team == "defense"),
                           key=lambda p: ((p.position[0] - carrier.position[0]) ** 2
                                          + (p.position[1] - carrier.position[1]) ** 2))
        defender = defenders[0]
        baseline = predict_state(params, state)
        moved = circle_move(state, defender.player_id, carrier.player_id,
                            ANGLE_RAD)
        perturbed = predict_state(params, moved)
        delta = perturbed.value - baseline.value
        if abs(delta) > 1e-3:
            chosen = (state, defender, baseline, delta)
            break
    if chosen is None:
        raise SystemExit("no test state produced a usable rotation delta")
    state, defender, baseline, delta = chosen

    perturbation = Perturbation(player_id=defender.player_id,
                                kind="circle_move",
                                anchor_id=state.carrier().player_id,
                                angle=ANGLE_RAD)
    result = what_if(params, state, perturbation)
    assert abs(result.delta - delta) < 1e-12

    with open(os.path.join(HERE, "fixture_state.json"), "w") as fh:
        json.dump(state_to_dict(state), fh, indent=1, sort_keys=True)
        fh.write("\n")

    golden = {
        "dataset_seed": DATASET.seed,
        "model_seed": SPEC.seed,
        "best_epoch": history["best_epoch"],
        "prediction_value": baseline.value,
        "defender_id": defender.player_id,
        "anchor_id": state.carrier().player_id,
        "angle_rad": ANGLE_RAD,
        "circle_move_delta": result.delta,
        "perturbed_value": result.perturbed.value,
        "expected_end_line": result.expected_end_line,
        "attention_row_sums_ok": bool(all(
            np.allclose(att.sum(axis=1), 1.0, atol=1e-9)
            for att in baseline.attention)),
    }
    with open(os.path.join(HERE, "golden.json"), "w") as fh:
        json.dump(golden, fh, indent=1, sort_keys=True)
        fh.write("\n")
    print("fixture written; prediction", baseline.value,
          "rotation delta", result.delta)


if __name__ == "__main__":
    main()
