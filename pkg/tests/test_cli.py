import json
import os

import pytest

from playgraph.cli import EXIT_DATA, EXIT_OK, EXIT_USAGE, main

FIXTURES = os.path.join(os.path.dirname(os.path.abspath(__file__)), "fixtures")
FIXTURE_CKPT = os.path.join(FIXTURES, "fixture_model.ckpt")
FIXTURE_STATE = os.path.join(FIXTURES, "fixture_state.json")


def run(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def test_no_subcommand_is_usage_error(capsys):
    code, _, _ = run(capsys, )
    assert code == EXIT_USAGE


def test_unknown_subcommand_is_usage_error(capsys):
    code, _, _ = run(capsys, "launch")
    assert code == EXIT_USAGE


def test_gen_data_writes_ndjson(tmp_path, capsys):
    out = str(tmp_path / "states.ndjson")
    code, stdout, stderr = run(capsys, "gen-data", "--task", "rush",
                               "--seed", "4", "--n", "15", "--out", out)
    assert code == EXIT_OK
    doc = json.loads(stdout)
    assert doc == {"task": "rush", "n_states": 15, "seed": 4, "path": out}
    assert len(open(out).read().strip().split("\n")) == 15
    assert "wrote 15 states" in stderr


def test_gen_data_same_seed_same_bytes(tmp_path, capsys):
    a, b = str(tmp_path / "a.ndjson"), str(tmp_path / "b.ndjson")
    run(capsys, "gen-data", "--task", "round", "--seed", "9", "--n", "12",
        "--out", a)
    run(capsys, "gen-data", "--task", "round", "--seed", "9", "--n", "12",
        "--out", b)
    assert open(a, "rb").read() == open(b, "rb").read()


def test_train_eval_round_trip(tmp_path, capsys):
    data = str(tmp_path / "d.ndjson")
    model = str(tmp_path / "m.ckpt")
    run(capsys, "gen-data", "--task", "rush", "--seed", "2", "--n", "40",
        "--out", data)
    code, stdout, _ = run(capsys, "train", "--data", data, "--variant",
                          "state", "--hidden-state", "8", "--epochs", "3",
                          "--batch-size", "16", "--model", model)
    assert code == EXIT_OK
    doc = json.loads(stdout)
    assert doc["model_path"] == model
    assert "mse" in doc["test_metrics"]
    assert doc["history"]["epochs_run"] <= 3
    assert os.path.exists(model)

    code, stdout, _ = run(capsys, "eval", "--model", model, "--data", data)
    assert code == EXIT_OK
    metrics = json.loads(stdout)["metrics"]
    assert set(metrics) == {"mse", "mae"}


def test_predict_fixture(capsys):
    code, stdout, _ = run(capsys, "predict", "--model", FIXTURE_CKPT,
                          "--state", FIXTURE_STATE)
    assert code == EXIT_OK
    doc = json.loads(stdout)
    golden = json.load(open(os.path.join(FIXTURES, "golden.json")))
    assert doc["value"] == pytest.approx(golden["prediction_value"],
                                         abs=1e-12)
    assert doc["schema_version"] == "1"
    assert len(doc["node_order"]) == 22


def test_whatif_circle_move_matches_golden(capsys):
    golden = json.load(open(os.path.join(FIXTURES, "golden.json")))
    perturbation = json.dumps({
        "player_id": golden["defender_id"], "kind": "circle_move",
        "anchor_id": golden["anchor_id"], "angle": golden["angle_rad"],
    })
    code, stdout, _ = run(capsys, "whatif", "--model", FIXTURE_CKPT,
                          "--state", FIXTURE_STATE,
                          "--perturbation", perturbation)
    assert code == EXIT_OK
    doc = json.loads(stdout)
    assert doc["delta"] == pytest.approx(golden["circle_move_delta"],
                                         abs=1e-12)
    assert doc["expected_end_line"] == pytest.approx(
        golden["expected_end_line"], abs=1e-12)


def test_whatif_bad_json_is_usage_error(capsys):
    code, _, stderr = run(capsys, "whatif", "--model", FIXTURE_CKPT,
                          "--state", FIXTURE_STATE,
                          "--perturbation", "{{nope")
    assert code == EXIT_USAGE
    assert "usage error" in stderr


def test_missing_checkpoint_is_data_error(tmp_path, capsys):
    code, _, stderr = run(capsys, "predict", "--model",
                          str(tmp_path / "no.ckpt"), "--state", FIXTURE_STATE)
    assert code == EXIT_DATA
    assert "data error" in stderr


def test_invalid_state_file_is_data_error(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{"t": 1.0, "global": [], "players": []}')
    code, _, stderr = run(capsys, "predict", "--model", FIXTURE_CKPT,
                          "--state", str(bad))
    assert code == EXIT_DATA


def test_corrupt_checkpoint_is_data_error(tmp_path, capsys):
    junk = tmp_path / "junk.ckpt"
    junk.write_bytes(b"not a checkpoint at all")
    code, _, _ = run(capsys, "predict", "--model", str(junk),
                     "--state", FIXTURE_STATE)
    assert code == EXIT_DATA


def test_trials_json_and_rerun_bytes(tmp_path, capsys):
    data = str(tmp_path / "d.ndjson")
    run(capsys, "gen-data", "--task", "rush", "--seed", "3", "--n", "30",
        "--out", data)
    out = str(tmp_path / "report.json")
    argv = ["trials", "--data", data, "--n-trials", "2", "--epochs", "2",
            "--batch-size", "16", "--hidden-state", "4", "--hidden-graph",
            "2", "--seed", "1", "--out", out]
    code, stdout1, stderr = run(capsys, *argv)
    assert code == EXIT_OK
    assert "Model" in stderr, "table goes to stderr"
    first_bytes = open(out, "rb").read()
    code, stdout2, _ = run(capsys, *argv)
    assert code == EXIT_OK
    assert stdout1 == stdout2
    assert open(out, "rb").read() == first_bytes
    doc = json.loads(stdout1)
    assert set(doc) == {"config", "reports", "summary"}
    assert len(doc["reports"]) == 2
    labels = set(doc["reports"][0]["metrics"].keys())
    assert labels == {"state", "gcn", "gat", "gcn_state", "gat_state"}


def test_trials_head_ablation_mode(tmp_path, capsys):
    data = str(tmp_path / "d.ndjson")
    run(capsys, "gen-data", "--task", "rush", "--seed", "3", "--n", "30",
        "--out", data)
    code, stdout, stderr = run(capsys, "trials", "--data", data,
                               "--n-trials", "2", "--epochs", "2",
                               "--batch-size", "16", "--hidden-state", "4",
                               "--hidden-graph", "2", "--ablate-heads")
    assert code == EXIT_OK
    doc = json.loads(stdout)
    assert [r["heads"] for r in doc["ablation"]["rows"]] == [1, 2, 4, 8]
    assert "heads" in stderr.lower()


def test_config_file_feeds_cli(tmp_path, capsys):
    cfg = tmp_path / "run.toml"
    cfg.write_text('[data]\nn_states = 17\n[model]\nvariant = "state"\n')
    out = str(tmp_path / "x.ndjson")
    code, stdout, _ = run(capsys, "gen-data", "--config", str(cfg),
                          "--seed", "1", "--out", out)
    assert code == EXIT_OK
    assert json.loads(stdout)["n_states"] == 17
