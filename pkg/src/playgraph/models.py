"""The five candidate architectures with unified forward/backward.

Variants: a state-vector MLP, graph-only GCN/GAT models, and combined
models that concatenate a pooled graph branch with the state branch before
one final dense layer. The branches share no parameters. GCN branches
consume inverse-distance graphs row-normalized at forward time; GAT
branches learn attention over constant-connectivity graphs.

All forward paths run batched over a leading axis internally; the public
``forward`` wraps a single instance and exposes the first graph layer's
attention matrices (coefficients over the actual player nodes).
"""

from __future__ import annotations

import dataclasses
import json
import struct
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import layers as L
from . import tensor as T
from .errors import (
    CheckpointFormatError,
    ContractViolationError,
    NonFiniteLossError,
    SchemaMismatchError,
)
from .game import (
    EDGE_CONSTANT,
    EDGE_INVERSE_DISTANCE,
    FeatureSchema,
    GameGraph,
    GameState,
    apply_node_filter,
    build_graph,
    featurize_nodes,
    featurize_state_vector,
)

VARIANTS = ("state", "gcn", "gat", "gcn_state", "gat_state")
TASK_REGRESSION = "regression"
TASK_CLASSIFICATION = "classification"

CHECKPOINT_MAGIC = b"PLAYGRAPHCKPT\n"
CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class ModelSpec:
    """Architecture hyperparameters; fully determines parameter shapes."""

    variant: str
    task: str
    hidden_state: int = 64
    hidden_graph: int = 32
    heads: int = 1
    graph_layers: int = 1
    edge_mode: str = ""
    seed: int = 0
    node_filter: str = "none"

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ContractViolationError(
                f"variant must be one of {VARIANTS}, got {self.variant!r}"
            )
        if self.task not in (TASK_REGRESSION, TASK_CLASSIFICATION):
            raise ContractViolationError(f"unknown task {self.task!r}")
        if self.heads < 1:
            raise ContractViolationError("heads must be >= 1")
        if self.hidden_state < 1 or self.hidden_graph < 1:
            raise ContractViolationError("hidden sizes must be >= 1")
        if self.graph_layers < 1:
            raise ContractViolationError("graph_layers must be >= 1")
        if self.node_filter not in ("none", "carrier_and_defense"):
            raise ContractViolationError(f"unknown node_filter {self.node_filter!r}")
        # Edge mode is dictated by the variant: distances for GCN, learned
        # attention over constant connectivity for GAT.
        if self.uses_gcn:
            expected = EDGE_INVERSE_DISTANCE
        elif self.uses_attention:
            expected = EDGE_CONSTANT
        else:
            expected = ""
        if self.edge_mode == "":
            object.__setattr__(self, "edge_mode", expected)
        elif self.edge_mode != expected:
            raise ContractViolationError(
                f"variant {self.variant!r} requires edge_mode {expected!r}, "
                f"got {self.edge_mode!r}"
            )
        if self.uses_gcn and self.heads != 1:
            raise ContractViolationError("gcn variants support a single head only")

    @property
    def has_graph_branch(self) -> bool:
        return self.variant != "state"

    @property
    def has_state_branch(self) -> bool:
        return self.variant in ("state", "gcn_state", "gat_state")

    @property
    def uses_attention(self) -> bool:
        return self.variant in ("gat", "gat_state")

    @property
    def uses_gcn(self) -> bool:
        return self.variant in ("gcn", "gcn_state")

    @property
    def graph_out_width(self) -> int:
        if not self.has_graph_branch:
            return 0
        return self.heads * self.hidden_graph


@dataclass
class Prediction:
    """Model output for one state.

    ``attention`` holds one row-stochastic matrix per head (first graph
    layer) when the variant estimates attention, else None. ``node_order``
    gives the player_id behind each row/column.
    """

    value: float
    attention: Optional[List[np.ndarray]]
    node_order: Tuple[str, ...]


@dataclass
class ModelParams:
    """All trainable tensors plus the schemas inputs must be normalized by."""

    spec: ModelSpec
    node_schema: Optional[FeatureSchema]
    state_schema: Optional[FeatureSchema]
    graph: List[L.GraphLayerParams]
    state_W1: Optional[T.ParamTensor]
    state_b1: Optional[T.ParamTensor]
    state_W2: Optional[T.ParamTensor]
    state_b2: Optional[T.ParamTensor]
    final_W: T.ParamTensor
    final_b: T.ParamTensor
    adam: Dict[str, T.AdamState]

    def tensors(self) -> List[T.ParamTensor]:
        """Declared order; checkpoints serialize tensors in this order."""
        out: List[T.ParamTensor] = []
        for layer in self.graph:
            out.extend(layer.W)
            if layer.a is not None:
                out.extend(layer.a)
        for t in (self.state_W1, self.state_b1, self.state_W2, self.state_b2):
            if t is not None:
                out.append(t)
        out.extend([self.final_W, self.final_b])
        return out

    def zero_grads(self) -> None:
        for t in self.tensors():
            t.zero_grad()


def _xavier(rng: np.random.Generator, fan_in: int, fan_out: int,
            shape: Tuple[int, int]) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


def build_model(spec: ModelSpec,
                node_schema: Optional[FeatureSchema],
                state_schema: Optional[FeatureSchema]) -> ModelParams:
    """Xavier-uniform initialization seeded by spec.seed.

    Tensors are drawn in declared order, so identical spec+schemas yield
    bitwise-identical parameters.
    """
    if spec.has_graph_branch and node_schema is None:
        raise ContractViolationError(f"variant {spec.variant!r} needs a node schema")
    if spec.has_state_branch and state_schema is None:
        raise ContractViolationError(f"variant {spec.variant!r} needs a state schema")
    rng = np.random.default_rng(spec.seed)

    graph_layers: List[L.GraphLayerParams] = []
    if spec.has_graph_branch:
        in_dim = len(node_schema)
        for li in range(spec.graph_layers):
            Ws = [T.ParamTensor(
                f"graph{li}.W{h}",
                _xavier(rng, in_dim, spec.hidden_graph, (in_dim, spec.hidden_graph)),
            ) for h in range(spec.heads)]
            a_vecs = None
            if spec.uses_attention:
                a_vecs = [T.ParamTensor(
                    f"graph{li}.a{h}",
                    _xavier(rng, 2 * spec.hidden_graph, 1, (2 * spec.hidden_graph, 1)),
                ) for h in range(spec.heads)]
            graph_layers.append(L.GraphLayerParams(W=Ws, a=a_vecs,
                                                   activation="leaky_relu"))
            in_dim = spec.graph_out_width

    state_W1 = state_b1 = state_W2 = state_b2 = None
    if spec.has_state_branch:
        fs = len(state_schema)
        hs = spec.hidden_state
        state_W1 = T.ParamTensor("state.W1", _xavier(rng, fs, hs, (fs, hs)))
        state_b1 = T.ParamTensor("state.b1", np.zeros((1, hs)))
        state_W2 = T.ParamTensor("state.W2", _xavier(rng, hs, hs, (hs, hs)))
        state_b2 = T.ParamTensor("state.b2", np.zeros((1, hs)))

    concat_width = spec.graph_out_width \
        + (spec.hidden_state if spec.has_state_branch else 0)
    final_W = T.ParamTensor("final.W", _xavier(rng, concat_width, 1, (concat_width, 1)))
    final_b = T.ParamTensor("final.b", np.zeros((1, 1)))

    params = ModelParams(
        spec=spec,
        node_schema=node_schema if spec.has_graph_branch else None,
        state_schema=state_schema if spec.has_state_branch else None,
        graph=graph_layers,
        state_W1=state_W1, state_b1=state_b1,
        state_W2=state_W2, state_b2=state_b2,
        final_W=final_W, final_b=final_b,
        adam={},
    )
    params.adam = {t.name: T.AdamState.for_param(t) for t in params.tensors()}
    return params


# ---------------------------------------------------------------------------
# Batched forward / backward core
# ---------------------------------------------------------------------------

@dataclass
class ModelBatch:
    """Normalized, stacked inputs for a batch of states of one task."""

    nodes: Optional[np.ndarray]    # (B, N, F) schema-normalized
    edges: Optional[np.ndarray]    # (B, N, N) raw edge weights
    vecs: Optional[np.ndarray]     # (B, Fs) schema-normalized
    labels: Optional[np.ndarray]   # (B,)

    def __len__(self):
        for arr in (self.nodes, self.vecs):
            if arr is not None:
                return arr.shape[0]
        return 0


@dataclass
class _ForwardCache:
    graph_caches: list
    attention: Optional[List[np.ndarray]]
    n_nodes: int
    state_cache1: Optional[tuple]
    state_cache2: Optional[tuple]
    final_cache: tuple
    logits: np.ndarray           # (B, 1) final pre-activation
    values: np.ndarray           # (B,)


def _forward_core(params: ModelParams, batch: ModelBatch) -> _ForwardCache:
    spec = params.spec
    parts = []
    graph_caches: list = []
    attention = None
    n_nodes = 0
    if spec.has_graph_branch:
        if batch.nodes is None:
            raise ContractViolationError(
                f"variant {spec.variant!r} requires graph input"
            )
        h = batch.nodes
        n_nodes = h.shape[1]
        for layer in params.graph:
            if spec.uses_gcn:
                e_norm = L.normalize_edges(batch.edges)
                h, cache = L.gcn_forward(h, e_norm, layer)
            else:
                h, att, cache = L.gat_forward(h, layer)
                if attention is None:
                    attention = att
            graph_caches.append(cache)
        parts.append(L.global_average_pool(h))

    state_cache1 = state_cache2 = None
    if spec.has_state_branch:
        if batch.vecs is None:
            raise ContractViolationError(
                f"variant {spec.variant!r} requires a state vector input"
            )
        s, state_cache1 = T.dense_forward(batch.vecs, params.state_W1,
                                          params.state_b1, "leaky_relu")
        s, state_cache2 = T.dense_forward(s, params.state_W2,
                                          params.state_b2, "leaky_relu")
        parts.append(s)

    concat = parts[0] if len(parts) == 1 else np.concatenate(parts, axis=1)
    logits, final_cache = T.dense_forward(concat, params.final_W,
                                          params.final_b, "linear")
    if spec.task == TASK_CLASSIFICATION:
        values = np.asarray(T.sigmoid(logits[:, 0]))
    else:
        values = logits[:, 0]
    return _ForwardCache(graph_caches=graph_caches, attention=attention,
                         n_nodes=n_nodes, state_cache1=state_cache1,
                         state_cache2=state_cache2, final_cache=final_cache,
                         logits=logits, values=values)


def _backward_core(params: ModelParams, cache: _ForwardCache,
                   d_logits: np.ndarray) -> None:
    """Accumulate gradients given d loss / d final pre-activation."""
    spec = params.spec
    d_concat = T.dense_backward(cache.final_cache, params.final_W,
                                params.final_b, d_logits, "linear")
    offset = 0
    if spec.has_graph_branch:
        w = spec.graph_out_width
        d_pooled = d_concat[:, :w]
        offset = w
        d_h = L.global_average_pool_backward(d_pooled, cache.n_nodes)
        for layer, lcache in zip(reversed(params.graph),
                                 reversed(cache.graph_caches)):
            if spec.uses_gcn:
                d_h = L.gcn_backward(lcache, layer, d_h)
            else:
                d_h = L.gat_backward(lcache, layer, d_h)
    if spec.has_state_branch:
        d_s = d_concat[:, offset:]
        d_s = T.dense_backward(cache.state_cache2, params.state_W2,
                               params.state_b2, d_s, "leaky_relu")
        T.dense_backward(cache.state_cache1, params.state_W1,
                         params.state_b1, d_s, "leaky_relu")


def batch_values(params: ModelParams, batch: ModelBatch) -> np.ndarray:
    """Model outputs for a whole batch (inference path for evaluation)."""
    return _forward_core(params, batch).values


def batch_loss(params: ModelParams, batch: ModelBatch) -> float:
    """Mean loss of the current parameters on a batch, no updates."""
    if batch.labels is None:
        raise ContractViolationError("batch has no labels")
    values = _forward_core(params, batch).values
    if params.spec.task == TASK_CLASSIFICATION:
        return T.loss_bce(values, batch.labels)
    return T.loss_mse(values, batch.labels)


def backward_step(params: ModelParams, batch: ModelBatch) -> float:
    """One optimization step: accumulate batch gradients, apply Adam to
    every tensor, zero the grads. Returns the pre-step mean loss."""
    if len(batch) == 0:
        raise ContractViolationError("backward_step needs a non-empty batch")
    if batch.labels is None or batch.labels.size != len(batch):
        raise ContractViolationError("backward_step needs one label per example")
    params.zero_grads()
    cache = _forward_core(params, batch)
    if params.spec.task == TASK_CLASSIFICATION:
        loss = T.loss_bce(cache.values, batch.labels)
        d_logits = T.loss_bce_logit_grad(cache.values, batch.labels)
    else:
        loss = T.loss_mse(cache.values, batch.labels)
        d_logits = T.loss_mse_grad(cache.values, batch.labels)
    if not np.isfinite(loss):
        raise NonFiniteLossError(
            f"non-finite training loss ({loss}) on a batch of {len(batch)}; "
            f"value range [{np.min(cache.values)}, {np.max(cache.values)}]"
        )
    _backward_core(params, cache, d_logits.reshape(-1, 1))
    for t in params.tensors():
        T.adam_step(t, params.adam[t.name])
    params.zero_grads()
    return loss


def compute_gradients(params: ModelParams, batch: ModelBatch) -> float:
    """Populate grads for the batch loss without stepping (gradient checks)."""
    params.zero_grads()
    cache = _forward_core(params, batch)
    if params.spec.task == TASK_CLASSIFICATION:
        loss = T.loss_bce(cache.values, batch.labels)
        d_logits = T.loss_bce_logit_grad(cache.values, batch.labels)
    else:
        loss = T.loss_mse(cache.values, batch.labels)
        d_logits = T.loss_mse_grad(cache.values, batch.labels)
    _backward_core(params, cache, d_logits.reshape(-1, 1))
    return loss


# ---------------------------------------------------------------------------
# Single-instance surface
# ---------------------------------------------------------------------------

def _check_node_schema(params: ModelParams, schema: FeatureSchema) -> None:
    if params.node_schema is None:
        return
    if schema.names() != params.node_schema.names():
        diff = params.node_schema.diff(schema)
        raise SchemaMismatchError(
            "graph features do not match the model's node schema: "
            + "; ".join(diff)
        )


def _check_state_schema(params: ModelParams, schema: FeatureSchema) -> None:
    if params.state_schema is None:
        return
    if schema.names() != params.state_schema.names():
        diff = params.state_schema.diff(schema)
        raise SchemaMismatchError(
            "state vector does not match the model's state schema: "
            + "; ".join(diff)
        )


def forward(params: ModelParams, graph: Optional[GameGraph],
            state_vec: Optional[np.ndarray]) -> Prediction:
    """Deterministic single-state forward pass.

    Inputs are raw (unnormalized); the checkpoint's schemas are applied
    here. The state variant ignores the graph argument entirely.
    """
    spec = params.spec
    nodes = edges = vecs = None
    node_order: Tuple[str, ...] = ()
    if spec.has_graph_branch:
        if graph is None:
            raise ContractViolationError(f"variant {spec.variant!r} needs a graph")
        _check_node_schema(params, graph.schema)
        nodes = params.node_schema.normalize(graph.node_features)[None, :, :]
        edges = np.asarray(graph.edge_weights, dtype=np.float64)[None, :, :]
        node_order = graph.node_order
    if spec.has_state_branch:
        if state_vec is None:
            raise ContractViolationError(f"variant {spec.variant!r} needs a state vector")
        vec = np.asarray(state_vec, dtype=np.float64).ravel()
        if len(vec) != len(params.state_schema):
            raise SchemaMismatchError(
                f"state vector length {len(vec)} != schema length "
                f"{len(params.state_schema)}"
            )
        vecs = params.state_schema.normalize(vec)[None, :]
    cache = _forward_core(params, ModelBatch(nodes, edges, vecs, None))
    attention = None
    if cache.attention is not None:
        attention = [a[0] for a in cache.attention]
    return Prediction(value=float(cache.values[0]), attention=attention,
                      node_order=node_order)


def predict_state(params: ModelParams, state: GameState) -> Prediction:
    """Featurize a raw game state per the model spec and run forward."""
    spec = params.spec
    filtered = apply_node_filter(state, spec.node_filter)
    graph = None
    vec = None
    if spec.has_graph_branch:
        graph = build_graph(filtered, spec.edge_mode)
    if spec.has_state_branch:
        vec, vec_schema = featurize_state_vector(state)
        _check_state_schema(params, vec_schema)
    return forward(params, graph, vec)


def fit_schemas(spec: ModelSpec, states: Sequence[GameState]
                ) -> Tuple[Optional[FeatureSchema], Optional[FeatureSchema]]:
    """Fit normalization stats on (training) states for the spec's inputs."""
    if not states:
        raise ContractViolationError("cannot fit schemas on an empty dataset")
    node_schema = state_schema = None
    if spec.has_graph_branch:
        rows = []
        base = None
        for s in states:
            X, sch = featurize_nodes(apply_node_filter(s, spec.node_filter))
            if base is None:
                base = sch
            rows.append(X)
        node_schema = base.fitted(np.concatenate(rows, axis=0))
    if spec.has_state_branch:
        vec_rows = []
        base = None
        for s in states:
            v, sch = featurize_state_vector(s)
            if base is None:
                base = sch
            vec_rows.append(v)
        state_schema = base.fitted(np.stack(vec_rows))
    return node_schema, state_schema


def encode_states(params: ModelParams, states: Sequence[GameState],
                  require_labels: bool = True) -> ModelBatch:
    """Featurize, schema-check, normalize, and stack states into a batch.

    Graph tasks have a fixed player count, so node tensors stack cleanly;
    mixed-size states are a contract violation.
    """
    if not states:
        raise ContractViolationError("cannot encode an empty state list")
    spec = params.spec
    nodes = edges = vecs = None
    if spec.has_graph_branch:
        gs = [build_graph(apply_node_filter(s, spec.node_filter), spec.edge_mode)
              for s in states]
        _check_node_schema(params, gs[0].schema)
        sizes = {g.node_features.shape[0] for g in gs}
        if len(sizes) != 1:
            raise ContractViolationError(
                f"cannot batch graphs with mixed node counts {sorted(sizes)}"
            )
        nodes = params.node_schema.normalize(
            np.stack([g.node_features for g in gs]))
        edges = np.stack([g.edge_weights for g in gs])
    if spec.has_state_branch:
        pairs = [featurize_state_vector(s) for s in states]
        _check_state_schema(params, pairs[0][1])
        vecs = params.state_schema.normalize(np.stack([v for v, _ in pairs]))
    labels = None
    have = [s.outcome for s in states if s.outcome is not None]
    if len(have) == len(states):
        labels = np.array(have, dtype=np.float64)
    elif require_labels:
        missing = sum(1 for s in states if s.outcome is None)
        raise ContractViolationError(f"{missing} states have no outcome label")
    return ModelBatch(nodes=nodes, edges=edges, vecs=vecs, labels=labels)


# ---------------------------------------------------------------------------
# Checkpoint container
# ---------------------------------------------------------------------------

def save_checkpoint(params: ModelParams, path) -> None:
    """Versioned binary container; see CHECKPOINT.md for the byte layout."""
    tensors = params.tensors()
    header = {
        "spec": dataclasses.asdict(params.spec),
        "node_schema": params.node_schema.to_dict() if params.node_schema else None,
        "state_schema": params.state_schema.to_dict() if params.state_schema else None,
        "tensors": [{"name": t.name, "shape": list(t.value.shape)}
                    for t in tensors],
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<I", CHECKPOINT_VERSION))
        fh.write(struct.pack("<Q", len(blob)))
        fh.write(blob)
        for t in tensors:
            fh.write(np.ascontiguousarray(t.value, dtype="<f8").tobytes())


def load_checkpoint(path) -> ModelParams:
    """Read and validate a checkpoint; round-trips are bitwise lossless.

    Optimizer state is not persisted: a loaded model gets fresh Adam
    accumulators.
    """
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:len(CHECKPOINT_MAGIC)] != CHECKPOINT_MAGIC:
        raise CheckpointFormatError(
            f"not a model checkpoint: expected header "
            f"{CHECKPOINT_MAGIC!r} at byte 0"
        )
    off = len(CHECKPOINT_MAGIC)
    if len(data) < off + 12:
        raise CheckpointFormatError("truncated checkpoint: missing header")
    (version,) = struct.unpack_from("<I", data, off)
    off += 4
    if version != CHECKPOINT_VERSION:
        raise CheckpointFormatError(
            f"unsupported checkpoint version {version}, "
            f"expected {CHECKPOINT_VERSION}"
        )
    (hlen,) = struct.unpack_from("<Q", data, off)
    off += 8
    if len(data) < off + hlen:
        raise CheckpointFormatError("truncated checkpoint: header cut short")
    try:
        header = json.loads(data[off:off + hlen].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointFormatError(f"corrupt checkpoint header: {exc}") from exc
    off += hlen

    spec = ModelSpec(**header["spec"])
    node_schema = (FeatureSchema.from_dict(header["node_schema"])
                   if header["node_schema"] else None)
    state_schema = (FeatureSchema.from_dict(header["state_schema"])
                    if header["state_schema"] else None)
    params = build_model(spec, node_schema, state_schema)

    tensors = params.tensors()
    table = header["tensors"]
    if len(table) != len(tensors):
        raise CheckpointFormatError(
            f"shape table lists {len(table)} tensors, spec implies {len(tensors)}"
        )
    for t, row in zip(tensors, table):
        if row["name"] != t.name or tuple(row["shape"]) != t.value.shape:
            raise CheckpointFormatError(
                f"shape table disagreement for {t.name!r}: file says "
                f"{row['name']!r} {row['shape']}, spec implies {list(t.value.shape)}"
            )
    need = sum(t.value.size for t in tensors) * 8
    if len(data) - off != need:
        raise CheckpointFormatError(
            f"truncated checkpoint: expected {need} payload bytes, "
            f"found {len(data) - off}"
        )
    for t in tensors:
        n = t.value.size * 8
        t.value[...] = np.frombuffer(
            data[off:off + n], dtype="<f8").reshape(t.value.shape)
        off += n
    return params
