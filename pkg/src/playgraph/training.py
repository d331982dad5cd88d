"""Experiment protocol: splits, training loop, metrics, repeated trials,
and one-sided paired t-tests against the state-vector baseline.

The repeated-trial harness featurizes the dataset once per input family
and refits normalization statistics per trial, so the whole five-model,
multi-trial benchmark stays within a desk-scale time budget. Everything is
seed-deterministic: (dataset seed, trial base seeds, specs) fix every
reported number exactly.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
import sys
import time
from dataclasses import dataclass, replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import models as M
from .errors import (
    ContractViolationError,
    DataError,
    NonFiniteLossError,
    TrainingDivergedError,
    UndefinedMetricError,
)
from .game import GameState, state_to_dict
from .models import ModelBatch, ModelParams, ModelSpec
from .tensor import loss_bce, loss_mae, loss_mse, metric_auc

GROUP_BY_STATE = "by_state"
GROUP_BY_PLAY_OR_ROUND = "by_play_or_round"


@dataclass(frozen=True)
class SplitConfig:
    train_frac: float = 0.70
    val_frac: float = 0.10
    test_frac: float = 0.20
    seed: int = 0
    grouping: str = GROUP_BY_STATE

    def __post_init__(self):
        total = self.train_frac + self.val_frac + self.test_frac
        if abs(total - 1.0) > 1e-9:
            raise ContractViolationError(f"split fractions sum to {total}, not 1")
        if min(self.train_frac, self.val_frac, self.test_frac) < 0:
            raise ContractViolationError("split fractions must be non-negative")
        if self.grouping not in (GROUP_BY_STATE, GROUP_BY_PLAY_OR_ROUND):
            raise ContractViolationError(f"unknown grouping {self.grouping!r}")


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 150
    batch_size: Optional[int] = None   # None: 32 regression / 512 classification
    lr: float = 1e-3
    patience: int = 10
    shuffle_seed: int = 0

    def resolved_batch_size(self, task: str) -> int:
        if self.batch_size is not None:
            return self.batch_size
        return 512 if task == M.TASK_CLASSIFICATION else 32


def split_indices(states: Sequence[GameState], cfg: SplitConfig
                  ) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Seeded shuffle then partition; returns index arrays.

    With by_play_or_round grouping, all states sharing a partition_key land
    in the same split.
    """
    n = len(states)
    if n < 10:
        raise DataError(f"dataset has {n} states; need at least 10 to split")
    rng = np.random.default_rng(cfg.seed)
    if cfg.grouping == GROUP_BY_STATE:
        perm = rng.permutation(n)
        n_train = int(round(cfg.train_frac * n))
        n_val = int(round(cfg.val_frac * n))
        return (perm[:n_train], perm[n_train:n_train + n_val],
                perm[n_train + n_val:])
    # group ordering by first appearance, then a seeded shuffle of groups
    groups: Dict[str, List[int]] = {}
    order: List[str] = []
    for i, s in enumerate(states):
        if s.partition_key not in groups:
            groups[s.partition_key] = []
            order.append(s.partition_key)
        groups[s.partition_key].append(i)
    perm = rng.permutation(len(order))
    train, val, test = [], [], []
    cut_train = cfg.train_frac * n
    cut_val = (cfg.train_frac + cfg.val_frac) * n
    filled = 0
    for gi in perm:
        members = groups[order[gi]]
        if filled < cut_train:
            train.extend(members)
        elif filled < cut_val:
            val.extend(members)
        else:
            test.extend(members)
        filled += len(members)
    return (np.array(train, dtype=np.int64), np.array(val, dtype=np.int64),
            np.array(test, dtype=np.int64))


def split_dataset(states: Sequence[GameState], cfg: SplitConfig
                  ) -> Tuple[List[GameState], List[GameState], List[GameState]]:
    tr, va, te = split_indices(states, cfg)
    pick = lambda idx: [states[i] for i in idx]
    return pick(tr), pick(va), pick(te)


# ---------------------------------------------------------------------------
# Training loop
# ---------------------------------------------------------------------------

def _slice_batch(batch: ModelBatch, idx) -> ModelBatch:
    take = lambda arr: None if arr is None else arr[idx]
    return ModelBatch(take(batch.nodes), take(batch.edges),
                      take(batch.vecs), take(batch.labels))


def _train_encoded(params: ModelParams, train: ModelBatch, val: ModelBatch,
                   cfg: TrainConfig) -> dict:
    """Epoch loop with best-validation early stopping over encoded batches."""
    if len(val) == 0 or val.labels is None:
        raise ContractViolationError("validation set must be non-empty and labeled")
    if len(train) == 0 or train.labels is None:
        raise ContractViolationError("training set must be non-empty and labeled")
    for st in params.adam.values():
        st.lr = cfg.lr
    n = len(train)
    bs = cfg.resolved_batch_size(params.spec.task)
    rng = np.random.default_rng(cfg.shuffle_seed)
    history = {"train_loss": [], "val_loss": [], "best_epoch": -1,
               "stopped_epoch": -1}
    best_val = math.inf
    best_values = [t.value.copy() for t in params.tensors()]
    stale = 0

    def restore_best():
        for t, v in zip(params.tensors(), best_values):
            t.value[...] = v

    for epoch in range(cfg.epochs):
        perm = rng.permutation(n)
        batch_losses = []
        try:
            for lo in range(0, n, bs):
                sl = _slice_batch(train, perm[lo:lo + bs])
                batch_losses.append(M.backward_step(params, sl))
        except NonFiniteLossError as exc:
            restore_best()
            history["stopped_epoch"] = epoch
            raise TrainingDivergedError(
                f"training diverged at epoch {epoch}: {exc}",
                params=params, history=history) from exc
        history["train_loss"].append(float(np.mean(batch_losses)))
        vloss = M.batch_loss(params, val)
        history["val_loss"].append(vloss)
        if vloss < best_val:
            best_val = vloss
            best_values = [t.value.copy() for t in params.tensors()]
            history["best_epoch"] = epoch
            stale = 0
        else:
            stale += 1
            if stale >= cfg.patience:
                history["stopped_epoch"] = epoch
                break
    if history["stopped_epoch"] < 0:
        history["stopped_epoch"] = len(history["train_loss"]) - 1
    restore_best()
    return history


def train_model(spec: ModelSpec, train: Sequence[GameState],
                val: Sequence[GameState], cfg: TrainConfig = TrainConfig()
                ) -> Tuple[ModelParams, dict]:
    """Fit schemas on the training split, build the model, run the epoch
    loop, and return the best-validation parameters plus history."""
    if not train or not val:
        raise ContractViolationError("train and validation splits must be non-empty")
    node_schema, state_schema = M.fit_schemas(spec, train)
    params = M.build_model(spec, node_schema, state_schema)
    enc_train = M.encode_states(params, train)
    enc_val = M.encode_states(params, val)
    history = _train_encoded(params, enc_train, enc_val, cfg)
    return params, history


# ---------------------------------------------------------------------------
# Evaluation
# ---------------------------------------------------------------------------

def metrics_from_values(values: np.ndarray, labels: np.ndarray,
                        task: str) -> Dict[str, object]:
    if task == M.TASK_REGRESSION:
        return {"mse": loss_mse(values, labels), "mae": loss_mae(values, labels)}
    out: Dict[str, object] = {"log_loss": loss_bce(values, labels)}
    try:
        out["auc"] = metric_auc(values, labels)
    except UndefinedMetricError as exc:
        out["auc"] = None
        out["auc_error"] = str(exc)
    return out


def evaluate(params: ModelParams, test: Sequence[GameState],
             task: str) -> Dict[str, object]:
    """Test-set metrics; refuses checkpoints trained for a different task."""
    if not test:
        raise ContractViolationError("test set must be non-empty")
    if params.spec.task != task:
        raise ContractViolationError(
            f"checkpoint was trained for task {params.spec.task!r}; "
            f"refusing to evaluate it as {task!r}"
        )
    batch = M.encode_states(params, test)
    values = M.batch_values(params, batch)
    return metrics_from_values(values, batch.labels, task)


def map_weighted_mean(values: Sequence[float], maps: Sequence[str]) -> float:
    """Mean of per-map means, so every map contributes equally regardless
    of how many states it has."""
    if len(values) != len(maps) or not values:
        raise ContractViolationError("values and map labels must align, non-empty")
    per_map: Dict[str, List[float]] = {}
    for v, m in zip(values, maps):
        per_map.setdefault(m, []).append(float(v))
    return float(np.mean([np.mean(vs) for vs in per_map.values()]))


# ---------------------------------------------------------------------------
# Paired t-test (no external stats dependency)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TTestResult:
    t_statistic: float
    p_value: float
    df: int
    direction: str = "baseline - model > 0"


def _betacf(a: float, b: float, x: float) -> float:
    """Continued fraction for the incomplete beta (modified Lentz)."""
    tiny = 1e-300
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < tiny:
        d = tiny
    d = 1.0 / d
    h = d
    for m in range(1, 300):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < 1e-12:
            return h
    raise ContractViolationError("incomplete beta continued fraction did not converge")


def regularized_incomplete_beta(a: float, b: float, x: float) -> float:
    """I_x(a, b) to about 1e-12, via the symmetric continued fraction."""
    if not 0.0 <= x <= 1.0:
        raise ContractViolationError(f"incomplete beta needs x in [0,1], got {x}")
    if x == 0.0:
        return 0.0
    if x == 1.0:
        return 1.0
    ln_front = (math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
                + a * math.log(x) + b * math.log1p(-x))
    front = math.exp(ln_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def t_survival(t: float, df: int) -> float:
    """P(T >= t) for Student's t with df degrees of freedom."""
    if df < 1:
        raise ContractViolationError("t distribution needs df >= 1")
    x = df / (df + t * t)
    two_tail = regularized_incomplete_beta(df / 2.0, 0.5, x)
    return 0.5 * two_tail if t >= 0 else 1.0 - 0.5 * two_tail


def paired_t_test(baseline: Sequence[float], model: Sequence[float]) -> TTestResult:
    """One-sided paired t-test of H_a: baseline - model > 0."""
    b = np.asarray(baseline, dtype=np.float64).ravel()
    m = np.asarray(model, dtype=np.float64).ravel()
    if b.size != m.size:
        raise ContractViolationError(
            f"paired t-test needs equal lengths, got {b.size} and {m.size}"
        )
    if b.size < 2:
        raise ContractViolationError("paired t-test needs at least 2 pairs")
    d = b - m
    sd = float(d.std(ddof=1))
    if sd == 0.0:
        raise ContractViolationError(
            "paired t-test undefined: differences have zero variance"
        )
    n = d.size
    t = float(d.mean() / (sd / math.sqrt(n)))
    return TTestResult(t_statistic=t, p_value=t_survival(t, n - 1), df=n - 1)


# ---------------------------------------------------------------------------
# Repeated trials
# ---------------------------------------------------------------------------

@dataclass
class TrialReport:
    trial_index: int
    metrics: Dict[str, Dict[str, object]]   # label -> metric dict
    seeds: Dict[str, object]
    test_hash: str
    wall_time_s: float

    def to_dict(self, include_wall_time: bool = False) -> dict:
        # Wall time is measurement noise; the persisted report must be
        # byte-identical across reruns, so it stays out of the file.
        out = {
            "trial_index": self.trial_index,
            "metrics": self.metrics,
            "seeds": self.seeds,
            "test_hash": self.test_hash,
        }
        if include_wall_time:
            out["wall_time_s"] = self.wall_time_s
        return out


@dataclass
class _RawFeatures:
    """Unnormalized per-state features shared across trials."""

    nodes: Optional[np.ndarray]
    edges: Optional[np.ndarray]
    node_schema_base: Optional[object]


def _hash_states(states: Sequence[GameState]) -> str:
    h = hashlib.sha256()
    for s in states:
        h.update(json.dumps(state_to_dict(s), sort_keys=True).encode())
        h.update(b"\n")
    return h.hexdigest()


def _featurize_all(spec: ModelSpec, states: Sequence[GameState],
                   cache: dict) -> Tuple[Optional[_RawFeatures],
                                         Optional[np.ndarray],
                                         Optional[object]]:
    """Raw node/edge tensors and state vectors for the whole dataset,
    memoized on the parts of the spec that affect featurization."""
    from .game import (apply_node_filter, build_graph, featurize_state_vector)
    graph_part = None
    if spec.has_graph_branch:
        key = ("graph", spec.edge_mode, spec.node_filter)
        if key not in cache:
            gs = [build_graph(apply_node_filter(s, spec.node_filter),
                              spec.edge_mode) for s in states]
            cache[key] = _RawFeatures(
                nodes=np.stack([g.node_features for g in gs]),
                edges=np.stack([g.edge_weights for g in gs]),
                node_schema_base=gs[0].schema,
            )
        graph_part = cache[key]
    vecs = vec_schema = None
    if spec.has_state_branch:
        if "vecs" not in cache:
            pairs = [featurize_state_vector(s) for s in states]
            cache["vecs"] = (np.stack([v for v, _ in pairs]), pairs[0][1])
        vecs, vec_schema = cache["vecs"]
    return graph_part, vecs, vec_schema


def _encode_split(spec, graph_part, vecs, vec_schema, labels, idx,
                  node_schema, state_schema) -> ModelBatch:
    nodes = edges = v = None
    if graph_part is not None:
        nodes = node_schema.normalize(graph_part.nodes[idx])
        edges = graph_part.edges[idx]
    if vecs is not None:
        v = state_schema.normalize(vecs[idx])
    return ModelBatch(nodes, edges, v, labels[idx])


def run_trials(specs: Dict[str, ModelSpec], dataset: Sequence[GameState],
               n_trials: int, split_cfg: SplitConfig = SplitConfig(),
               train_cfg: TrainConfig = TrainConfig(),
               progress: bool = False) -> List[TrialReport]:
    """Repeat split/train/test; trial i derives every seed as base + i.

    All specs share bitwise-identical splits within a trial. Reports keep
    per-label metrics; downstream t-tests need n_trials >= 2.
    """
    if n_trials < 1:
        raise ContractViolationError("n_trials must be >= 1")
    if not specs:
        raise ContractViolationError("run_trials needs at least one model spec")
    labels_missing = sum(1 for s in dataset if s.outcome is None)
    if labels_missing:
        raise DataError(f"{labels_missing} states lack outcome labels")
    labels = np.array([s.outcome for s in dataset], dtype=np.float64)
    feature_cache: dict = {}
    reports: List[TrialReport] = []
    for trial in range(n_trials):
        t0 = time.perf_counter()
        cfg_i = replace(split_cfg, seed=split_cfg.seed + trial)
        idx_train, idx_val, idx_test = split_indices(dataset, cfg_i)
        test_hash = _hash_states([dataset[i] for i in idx_test])
        metrics: Dict[str, Dict[str, object]] = {}
        model_seeds: Dict[str, int] = {}
        for label, spec in specs.items():
            spec_i = replace(spec, seed=spec.seed + trial)
            model_seeds[label] = spec_i.seed
            graph_part, vecs, vec_schema = _featurize_all(
                spec_i, dataset, feature_cache)
            node_schema = state_schema = None
            if graph_part is not None:
                node_schema = graph_part.node_schema_base.fitted(
                    graph_part.nodes[idx_train].reshape(
                        -1, graph_part.nodes.shape[-1]))
            if vecs is not None:
                state_schema = vec_schema.fitted(vecs[idx_train])
            params = M.build_model(spec_i, node_schema, state_schema)
            enc = lambda idx: _encode_split(spec_i, graph_part, vecs,
                                            vec_schema, labels, idx,
                                            node_schema, state_schema)
            cfg_t = replace(train_cfg,
                            shuffle_seed=train_cfg.shuffle_seed + trial)
            _train_encoded(params, enc(idx_train), enc(idx_val), cfg_t)
            test_batch = enc(idx_test)
            values = M.batch_values(params, test_batch)
            metrics[label] = metrics_from_values(values, test_batch.labels,
                                                 spec_i.task)
            if progress:
                print(f"trial {trial} {label}: {metrics[label]}",
                      file=sys.stderr)
        reports.append(TrialReport(
            trial_index=trial,
            metrics=metrics,
            seeds={"split": cfg_i.seed, "shuffle": train_cfg.shuffle_seed + trial,
                   "model": model_seeds},
            test_hash=test_hash,
            wall_time_s=time.perf_counter() - t0,
        ))
    return reports


def reports_to_json(reports: Sequence[TrialReport],
                    config: Optional[dict] = None,
                    summary: Optional[dict] = None) -> str:
    """Canonical serialization: sorted keys, no wall time, trailing newline."""
    doc: Dict[str, object] = {"reports": [r.to_dict() for r in reports]}
    if config is not None:
        doc["config"] = config
    if summary is not None:
        doc["summary"] = summary
    return json.dumps(doc, sort_keys=True, indent=2) + "\n"


def primary_metric(task: str) -> str:
    return "mse" if task == M.TASK_REGRESSION else "log_loss"


def summarize_trials(reports: Sequence[TrialReport], task: str,
                     baseline: str = "state") -> Dict[str, dict]:
    """Mean metrics per label plus one-sided t-tests against the baseline.

    t-test entries are null when fewer than 2 trials were run or the label
    is the baseline itself.
    """
    if not reports:
        raise ContractViolationError("no trial reports to summarize")
    labels = list(reports[0].metrics.keys())
    key = primary_metric(task)
    summary: Dict[str, dict] = {}
    base_series = None
    if baseline in labels:
        base_series = [r.metrics[baseline][key] for r in reports]
    for label in labels:
        series = {
            name: [r.metrics[label][name] for r in reports]
            for name in reports[0].metrics[label]
            if not name.endswith("_error")
        }
        entry: Dict[str, object] = {
            "mean": {name: (float(np.mean([v for v in vals if v is not None]))
                            if any(v is not None for v in vals) else None)
                     for name, vals in series.items()},
            "n_trials": len(reports),
        }
        if base_series is not None and label != baseline and len(reports) >= 2:
            tt = paired_t_test(base_series, series[key])
            entry["t_vs_baseline"] = tt.t_statistic
            entry["p_vs_baseline"] = tt.p_value
            entry["df"] = tt.df
        else:
            entry["t_vs_baseline"] = None
            entry["p_vs_baseline"] = None
            entry["df"] = None
        summary[label] = entry
    return summary


def render_results_table(summary: Dict[str, dict], task: str) -> str:
    """Text table in the benchmark layout: one model per row, metric
    columns, and the t-test against the state baseline."""
    if task == M.TASK_REGRESSION:
        cols = [("MSE", "mse"), ("MAE", "mae")]
    else:
        cols = [("Log Loss", "log_loss"), ("AUC", "auc")]
    head = f"{'Model':<12}" + "".join(f"{c:>10}" for c, _ in cols) \
        + f"{'t':>9}{'p':>9}"
    lines = [head, "-" * len(head)]
    for label, entry in summary.items():
        row = f"{label:<12}"
        for _, key in cols:
            v = entry["mean"].get(key)
            row += f"{v:>10.4f}" if v is not None else f"{'n/a':>10}"
        t, p = entry["t_vs_baseline"], entry["p_vs_baseline"]
        row += f"{t:>9.2f}" if t is not None else f"{'--':>9}"
        row += f"{p:>9.3f}" if p is not None else f"{'--':>9}"
        lines.append(row)
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# Attention-head ablation
# ---------------------------------------------------------------------------

def head_ablation(dataset: Sequence[GameState], base_spec: ModelSpec,
                  n_trials: int, heads: Sequence[int] = (1, 2, 4, 8),
                  split_cfg: SplitConfig = SplitConfig(),
                  train_cfg: TrainConfig = TrainConfig(),
                  progress: bool = False) -> dict:
    """Vary the attention-head count and compare each variant against the
    single-head model with paired t-tests (two-sided p, as the comparison
    table reports)."""
    if not base_spec.uses_attention:
        raise ContractViolationError("head ablation needs an attention variant")
    if 1 not in heads:
        raise ContractViolationError("head ablation needs the single-head baseline")
    specs = {f"heads_{k}": replace(base_spec, heads=k) for k in heads}
    reports = run_trials(specs, dataset, n_trials, split_cfg, train_cfg,
                         progress=progress)
    key = primary_metric(base_spec.task)
    base = [r.metrics["heads_1"][key] for r in reports]
    rows = []
    for k in heads:
        series = [r.metrics[f"heads_{k}"][key] for r in reports]
        row = {"heads": k, "mean_metric": float(np.mean(series)),
               "t_statistic": None, "p_value": None}
        if k != 1 and len(reports) >= 2:
            tt = paired_t_test(base, series)
            two_sided = 2.0 * min(tt.p_value, 1.0 - tt.p_value)
            row["t_statistic"] = tt.t_statistic
            row["p_value"] = two_sided
        rows.append(row)
    return {"metric": key, "rows": rows,
            "reports": [r.to_dict() for r in reports]}


def render_head_table(ablation: dict) -> str:
    metric = ablation["metric"].upper().replace("_", " ")
    head = f"{'Attention Heads':>16}{metric:>12}{'t-statistic':>14}{'p':>9}"
    lines = [head, "-" * len(head)]
    for row in ablation["rows"]:
        line = f"{row['heads']:>16d}{row['mean_metric']:>12.4f}"
        if row["t_statistic"] is None:
            line += f"{'--':>14}{'--':>9}"
        else:
            line += f"{row['t_statistic']:>14.2f}{row['p_value']:>9.3f}"
        lines.append(line)
    return "\n".join(lines)
