"""Operator command line: data generation, training, evaluation,
prediction, what-if, and the HTTP service.

Machine-readable JSON goes to stdout; progress and tables go to stderr.
Exit codes: 0 success, 1 usage error, 2 data/input error, 3 runtime error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from typing import Optional

from .config import RunConfig, load_run_config
from .errors import (
    CheckpointFormatError,
    ContractViolationError,
    DataError,
    MissingConfigError,
    NonFiniteLossError,
    SchemaMismatchError,
    TrainingDivergedError,
)
from .game import load_states, save_states, state_from_dict, validate_state
from .models import VARIANTS, load_checkpoint, predict_state, save_checkpoint
from .synth import gen_states
from .training import (
    evaluate,
    head_ablation,
    render_head_table,
    render_results_table,
    reports_to_json,
    run_trials,
    split_dataset,
    summarize_trials,
    train_model,
)
from .whatif import Perturbation, prediction_to_dict, what_if, whatif_result_to_dict
from .service.schemas import SCHEMA_VERSION

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_RUNTIME = 3


def _progress(msg: str) -> None:
    print(msg, file=sys.stderr)


def _emit(doc: dict) -> None:
    print(json.dumps(doc, sort_keys=True, indent=2))


def _config_from_args(args) -> RunConfig:
    flag_map = {
        "seed": "seed", "task": "task", "variant": "variant",
        "heads": "heads", "graph_layers": "graph_layers",
        "hidden_state": "hidden_state", "hidden_graph": "hidden_graph",
        "edge_mode": "edge_mode", "node_filter": "node_filter",
        "n": "n_states", "noise_std": "noise_std",
        "interaction_strength": "interaction_strength",
        "epochs": "epochs", "batch_size": "batch_size", "lr": "lr",
        "patience": "patience", "n_trials": "n_trials",
        "grouping": "grouping", "model": "model_path", "data": "data_path",
        "out": "out_path", "bind": "bind", "port": "port",
        "log_level": "log_level",
    }
    overrides = {}
    for flag, key in flag_map.items():
        value = getattr(args, flag, None)
        if value is not None:
            overrides[key] = value
    return load_run_config(getattr(args, "config", None), overrides=overrides)


def _load_dataset(cfg: RunConfig):
    if cfg.data_path:
        _progress(f"loading states from {cfg.data_path}")
        return load_states(cfg.data_path)
    _progress(f"generating {cfg.n_states} synthetic {cfg.task} states "
              f"(seed {cfg.seed})")
    return gen_states(cfg.synth_config())


def _load_single_state(path: str):
    with open(path, "r", encoding="utf-8") as fh:
        raw = json.load(fh)
    state = state_from_dict(raw, where=path)
    problems = validate_state(state)
    if problems:
        raise DataError(f"{path}: " + "; ".join(problems))
    return state


def _state_bounds(state):
    from .game import DEFAULT_CSGO_GEOMETRY, NFL_FIELD_LENGTH, NFL_FIELD_WIDTH, SPORT_NFL
    if state.sport() == SPORT_NFL:
        return (NFL_FIELD_LENGTH, NFL_FIELD_WIDTH)
    return DEFAULT_CSGO_GEOMETRY.bounds


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def cmd_gen_data(args) -> int:
    cfg = _config_from_args(args)
    if not cfg.out_path:
        raise ContractViolationError("gen-data needs --out")
    states = gen_states(cfg.synth_config())
    save_states(states, cfg.out_path)
    _progress(f"wrote {len(states)} states to {cfg.out_path}")
    _emit({"task": cfg.task, "n_states": len(states), "seed": cfg.seed,
           "path": cfg.out_path})
    return EXIT_OK


def cmd_train(args) -> int:
    cfg = _config_from_args(args)
    dataset = _load_dataset(cfg)
    train, val, test = split_dataset(dataset, cfg.split_config())
    _progress(f"split {len(train)}/{len(val)}/{len(test)}; training "
              f"{cfg.variant} ({cfg.model_task()})")
    params, history = train_model(cfg.model_spec(), train, val,
                                  cfg.train_config())
    save_checkpoint(params, cfg.model_path)
    metrics = evaluate(params, test, params.spec.task)
    _progress(f"saved checkpoint to {cfg.model_path}")
    _emit({
        "config": cfg.to_dict(),
        "history": {
            "epochs_run": len(history["train_loss"]),
            "best_epoch": history["best_epoch"],
            "stopped_epoch": history["stopped_epoch"],
            "best_val_loss": min(history["val_loss"]),
        },
        "test_metrics": metrics,
        "model_path": cfg.model_path,
    })
    return EXIT_OK


def cmd_eval(args) -> int:
    cfg = _config_from_args(args)
    if not cfg.data_path:
        raise ContractViolationError("eval needs --data")
    params = load_checkpoint(cfg.model_path)
    states = load_states(cfg.data_path)
    metrics = evaluate(params, states, params.spec.task)
    _emit({"model_path": cfg.model_path, "n_states": len(states),
           "metrics": metrics})
    return EXIT_OK


def cmd_trials(args) -> int:
    cfg = _config_from_args(args)
    dataset = _load_dataset(cfg)
    n_trials = cfg.resolved_n_trials()
    if getattr(args, "ablate_heads", False):
        result = head_ablation(dataset, cfg.model_spec("gat_state"),
                               n_trials=n_trials,
                               split_cfg=cfg.split_config(),
                               train_cfg=cfg.train_config(),
                               progress=True)
        _progress(render_head_table(result))
        doc = {"config": cfg.to_dict(), "ablation": {
            "metric": result["metric"], "rows": result["rows"]},
            "reports": result["reports"]}
        out = json.dumps(doc, sort_keys=True, indent=2) + "\n"
    else:
        specs = {v: cfg.model_spec(v) for v in VARIANTS}
        reports = run_trials(specs, dataset, n_trials,
                             split_cfg=cfg.split_config(),
                             train_cfg=cfg.train_config(), progress=True)
        summary = summarize_trials(reports, cfg.model_task())
        _progress(render_results_table(summary, cfg.model_task()))
        out = reports_to_json(reports, config=cfg.to_dict(), summary=summary)
    if cfg.out_path:
        with open(cfg.out_path, "w", encoding="utf-8") as fh:
            fh.write(out)
        _progress(f"wrote report to {cfg.out_path}")
    sys.stdout.write(out)
    return EXIT_OK


def cmd_predict(args) -> int:
    cfg = _config_from_args(args)
    params = load_checkpoint(cfg.model_path)
    state = _load_single_state(args.state)
    pred = predict_state(params, state)
    body = prediction_to_dict(pred)
    body["schema_version"] = SCHEMA_VERSION
    _emit(body)
    return EXIT_OK


def cmd_whatif(args) -> int:
    cfg = _config_from_args(args)
    params = load_checkpoint(cfg.model_path)
    state = _load_single_state(args.state)
    try:
        raw = json.loads(args.perturbation)
    except json.JSONDecodeError as exc:
        raise ContractViolationError(f"--perturbation is not valid JSON: {exc}")
    if not isinstance(raw, dict):
        raise ContractViolationError("--perturbation must be a JSON object")
    perturbation = Perturbation(
        player_id=raw.get("player_id", ""),
        kind=raw.get("kind", ""),
        coords=tuple(raw["coords"]) if raw.get("coords") is not None else None,
        anchor_id=raw.get("anchor_id"),
        angle=raw.get("angle"),
        attribute=raw.get("attribute"),
        value=raw.get("value"),
    )
    result = what_if(params, state, perturbation, bounds=_state_bounds(state))
    body = whatif_result_to_dict(result)
    body["schema_version"] = SCHEMA_VERSION
    _emit(body)
    return EXIT_OK


def cmd_serve(args) -> int:
    cfg = _config_from_args(args)
    params = load_checkpoint(cfg.model_path)
    _progress(f"serving {cfg.model_path} on {cfg.bind}:{cfg.port}")
    from .service import serve
    serve(params, bind=cfg.bind, port=cfg.port, log_level=cfg.log_level)
    return EXIT_OK


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="TOML config file")
    p.add_argument("--seed", type=int)
    p.add_argument("--task", choices=["rush", "round"])
    p.add_argument("--log-level", dest="log_level")


def _add_model_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--variant", choices=list(VARIANTS))
    p.add_argument("--edge-mode", dest="edge_mode")
    p.add_argument("--heads", type=int)
    p.add_argument("--graph-layers", dest="graph_layers", type=int)
    p.add_argument("--hidden-state", dest="hidden_state", type=int)
    p.add_argument("--hidden-graph", dest="hidden_graph", type=int)
    p.add_argument("--node-filter", dest="node_filter")


def _add_train_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch-size", dest="batch_size", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--patience", type=int)
    p.add_argument("--grouping", choices=["by_state", "by_play_or_round"])


def _add_data_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--data", help="NDJSON dataset path (default: synthesize)")
    p.add_argument("--n", type=int, help="synthetic state count")
    p.add_argument("--noise-std", dest="noise_std", type=float)
    p.add_argument("--interaction-strength", dest="interaction_strength",
                   type=float)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="playgraph",
        description="Graph-based sports outcome prediction toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="write a synthetic NDJSON dataset")
    _add_common(p); _add_data_flags(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("train", help="train one model and save a checkpoint")
    _add_common(p); _add_model_flags(p); _add_train_flags(p); _add_data_flags(p)
    p.add_argument("--model", help="checkpoint output path")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint on a dataset")
    _add_common(p)
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("trials", help="repeated five-model benchmark with t-tests")
    _add_common(p); _add_model_flags(p); _add_train_flags(p); _add_data_flags(p)
    p.add_argument("--n-trials", dest="n_trials", type=int)
    p.add_argument("--out", help="also write the JSON report here")
    p.add_argument("--ablate-heads", action="store_true",
                   help="run the attention-head ablation instead")
    p.set_defaults(func=cmd_trials)

    p = sub.add_parser("predict", help="predict one state with a checkpoint")
    _add_common(p)
    p.add_argument("--model", required=True)
    p.add_argument("--state", required=True, help="single-state JSON file")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("whatif", help="perturb one state and re-predict")
    _add_common(p)
    p.add_argument("--model", required=True)
    p.add_argument("--state", required=True)
    p.add_argument("--perturbation", required=True,
                   help='JSON object, e.g. {"player_id":"def-3","kind":"set_position","coords":[50,20]}')
    p.set_defaults(func=cmd_whatif)

    p = sub.add_parser("serve", help="run the HTTP service")
    _add_common(p)
    p.add_argument("--model", required=True)
    p.add_argument("--bind")
    p.add_argument("--port", type=int)
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv: Optional[list] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    logging.basicConfig(stream=sys.stderr,
                        level=getattr(args, "log_level", None) and
                        getattr(args, "log_level").upper() or "WARNING")
    try:
        return args.func(args)
    except ContractViolationError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, MissingConfigError, SchemaMismatchError,
            CheckpointFormatError, FileNotFoundError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (TrainingDivergedError, NonFiniteLossError) as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except Exception as exc:  # pragma: no cover - last-resort diagnostics
        print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
