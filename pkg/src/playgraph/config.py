"""Run configuration merged from defaults, a TOML file, environment
variables, and command-line flags (later sources win, flags highest).

Environment variables use the PLAYGRAPH_ prefix with the upper-cased flat
key (PLAYGRAPH_SEED, PLAYGRAPH_PORT, ...). The merged config serializes
into every run's report so results stay reproducible from the report
alone.
"""

from __future__ import annotations

import dataclasses
import os
import sys
from dataclasses import dataclass
from typing import Dict, Mapping, Optional

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .errors import ContractViolationError, MissingConfigError
from .models import ModelSpec
from .synth import SyntheticConfig
from .training import SplitConfig, TrainConfig

ENV_PREFIX = "PLAYGRAPH_"


@dataclass
class RunConfig:
    seed: int = 0
    task: str = "rush"

    # model
    variant: str = "gat_state"
    heads: int = 1
    graph_layers: int = 1
    hidden_state: int = 64
    hidden_graph: int = 32
    edge_mode: str = ""
    node_filter: str = "none"

    # data
    n_states: int = 1000
    noise_std: float = 0.0
    interaction_strength: float = 1.0

    # training
    epochs: int = 150
    batch_size: int = 0          # 0: per-task default
    lr: float = 1e-3
    patience: int = 10
    n_trials: int = 0            # 0: per-task default (30 rush, 1 round)

    # split
    train_frac: float = 0.70
    val_frac: float = 0.10
    test_frac: float = 0.20
    grouping: str = "by_state"

    # paths
    model_path: str = "model.ckpt"
    data_path: str = ""
    out_path: str = ""

    # service
    bind: str = "127.0.0.1"
    port: int = 8008
    log_level: str = "info"

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    # ---- resolved sub-configs -------------------------------------------

    def resolved_task(self) -> str:
        if self.task not in ("rush", "round"):
            raise ContractViolationError(f"task must be rush or round, got {self.task!r}")
        return self.task

    def model_task(self) -> str:
        return "regression" if self.resolved_task() == "rush" else "classification"

    def model_spec(self, variant: Optional[str] = None) -> ModelSpec:
        return ModelSpec(
            variant=variant or self.variant,
            task=self.model_task(),
            hidden_state=self.hidden_state,
            hidden_graph=self.hidden_graph,
            heads=self.heads if (variant or self.variant).startswith("gat") else 1,
            graph_layers=self.graph_layers,
            edge_mode="",
            seed=self.seed,
            node_filter=self.node_filter,
        )

    def synth_config(self) -> SyntheticConfig:
        return SyntheticConfig(
            seed=self.seed, n_states=self.n_states,
            task=self.resolved_task(), noise_std=self.noise_std,
            interaction_strength=self.interaction_strength,
        )

    def train_config(self) -> TrainConfig:
        return TrainConfig(
            epochs=self.epochs,
            batch_size=self.batch_size if self.batch_size > 0 else None,
            lr=self.lr, patience=self.patience, shuffle_seed=self.seed,
        )

    def split_config(self) -> SplitConfig:
        return SplitConfig(train_frac=self.train_frac, val_frac=self.val_frac,
                           test_frac=self.test_frac, seed=self.seed,
                           grouping=self.grouping)

    def resolved_n_trials(self) -> int:
        if self.n_trials > 0:
            return self.n_trials
        return 30 if self.resolved_task() == "rush" else 1


# TOML layout: top-level seed/task, then [model], [data], [training],
# [split], [paths], [service] sections. _SECTION_KEYS maps each section's
# keys onto flat RunConfig attributes.
_SECTION_KEYS: Dict[str, tuple] = {
    "": ("seed", "task"),
    "model": ("variant", "heads", "graph_layers", "hidden_state",
              "hidden_graph", "edge_mode", "node_filter"),
    "data": ("n_states", "noise_std", "interaction_strength"),
    "training": ("epochs", "batch_size", "lr", "patience", "n_trials"),
    "split": ("train_frac", "val_frac", "test_frac", "grouping"),
    "paths": ("model_path", "data_path", "out_path"),
    "service": ("bind", "port", "log_level"),
}

_FIELD_TYPES = {f.name: f.type for f in dataclasses.fields(RunConfig)}


def _coerce(name: str, raw) -> object:
    ftype = _FIELD_TYPES[name]
    try:
        if ftype in ("int", int):
            return int(raw)
        if ftype in ("float", float):
            return float(raw)
        return str(raw)
    except (TypeError, ValueError) as exc:
        raise ContractViolationError(
            f"config key {name!r}: cannot parse {raw!r} as {ftype}"
        ) from exc


def read_config_file(path: str) -> Dict[str, object]:
    """Flatten a TOML config into RunConfig keys, rejecting unknown ones."""
    if not os.path.exists(path):
        raise MissingConfigError(f"config file not found: {path}")
    with open(path, "rb") as fh:
        try:
            doc = tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise ContractViolationError(f"invalid TOML in {path}: {exc}") from exc
    flat: Dict[str, object] = {}
    for key, value in doc.items():
        if isinstance(value, dict):
            allowed = _SECTION_KEYS.get(key)
            if allowed is None:
                raise ContractViolationError(
                    f"unknown config section [{key}] in {path}"
                )
            for k, v in value.items():
                if k not in allowed:
                    raise ContractViolationError(
                        f"unknown config key {k!r} in section [{key}] of {path}"
                    )
                flat[k] = _coerce(k, v)
        else:
            if key not in _SECTION_KEYS[""]:
                raise ContractViolationError(
                    f"unknown top-level config key {key!r} in {path}"
                )
            flat[key] = _coerce(key, value)
    return flat


def read_env(env: Optional[Mapping[str, str]] = None) -> Dict[str, object]:
    """PLAYGRAPH_-prefixed environment overrides for any flat key.

    Unknown PLAYGRAPH_ variables are rejected so typos fail loudly instead
    of silently falling back to defaults. PLAYGRAPH_CONFIG is consumed by
    load_run_config itself.
    """
    env = os.environ if env is None else env
    known = {ENV_PREFIX + name.upper(): name for name in _FIELD_TYPES}
    known[ENV_PREFIX + "LOG"] = "log_level"
    out: Dict[str, object] = {}
    for var, raw in env.items():
        if not var.startswith(ENV_PREFIX) or var == ENV_PREFIX + "CONFIG":
            continue
        name = known.get(var)
        if name is None:
            raise ContractViolationError(
                f"unknown environment variable {var}; known keys: "
                + ", ".join(sorted(known))
            )
        try:
            out[name] = _coerce(name, raw)
        except ContractViolationError as exc:
            raise ContractViolationError(f"{var}: {exc}") from exc
    return out


def load_run_config(config_path: Optional[str] = None,
                    env: Optional[Mapping[str, str]] = None,
                    overrides: Optional[Mapping[str, object]] = None
                    ) -> RunConfig:
    """Merge defaults < file < environment < explicit overrides (flags)."""
    env = os.environ if env is None else env
    merged: Dict[str, object] = {}
    path = config_path or env.get(ENV_PREFIX + "CONFIG")
    if path:
        merged.update(read_config_file(path))
    merged.update(read_env(env))
    if overrides:
        for k, v in overrides.items():
            if v is None:
                continue
            if k not in _FIELD_TYPES:
                raise ContractViolationError(f"unknown config override {k!r}")
            merged[k] = _coerce(k, v)
    return RunConfig(**merged)
