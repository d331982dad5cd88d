"""Graph operators: GCN transform, attention coefficients, multi-head
concatenation, and global average pooling, with hand-derived backward passes.

All operators accept a single instance (N x F nodes) or a stacked batch
(B x N x F); batched inputs return batched outputs. Attention coefficient
matrices follow the convention that entry (i, j) is the weight of node j's
features toward node i, so every row is a softmax distribution over sources.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np

from .errors import ContractViolationError, ShapeError
from .tensor import (
    DEFAULT_LEAKY_SLOPE,
    ParamTensor,
    activation_apply,
    activation_grad,
    leaky_relu_grad,
    row_softmax,
)


@dataclass
class GraphLayerParams:
    """Parameters for one graph layer.

    W holds one F x K' matrix per head. Attention layers additionally hold
    one 2K' x 1 vector per head; fixed-edge (GCN) layers have none.
    """

    W: List[ParamTensor]
    a: Optional[List[ParamTensor]] = None
    activation: str = "leaky_relu"
    slope: float = DEFAULT_LEAKY_SLOPE
    att_slope: float = DEFAULT_LEAKY_SLOPE

    def __post_init__(self):
        if len(self.W) < 1:
            raise ContractViolationError("graph layer needs at least one head")
        if self.a is not None:
            if len(self.a) != len(self.W):
                raise ContractViolationError(
                    f"attention layer needs one a per head: "
                    f"{len(self.a)} a vs {len(self.W)} W"
                )
            for w, a in zip(self.W, self.a):
                k = w.value.shape[1]
                if a.value.shape != (2 * k, 1):
                    raise ShapeError(
                        f"attention vector shape {a.value.shape} != ({2 * k}, 1)"
                    )

    @property
    def heads(self) -> int:
        return len(self.W)

    @property
    def is_attention(self) -> bool:
        return self.a is not None

    def tensors(self) -> List[ParamTensor]:
        out = list(self.W)
        if self.a is not None:
            out.extend(self.a)
        return out


def _batched(x: np.ndarray, name: str) -> Tuple[np.ndarray, bool]:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 2:
        return x[None, :, :], True
    if x.ndim == 3:
        return x, False
    raise ShapeError(f"{name} must be 2-D or 3-D, got shape {x.shape}")


def normalize_edges(raw_edges: np.ndarray) -> np.ndarray:
    """Divide each row by its sum, making the edge matrix row-stochastic.

    Self-loops guarantee positive row sums; a zero row is a contract
    violation, as is any negative entry.
    """
    e, single = _batched(raw_edges, "edges")
    if (e < 0.0).any():
        raise ContractViolationError("edge weights must be nonnegative")
    sums = e.sum(axis=-1, keepdims=True)
    if (sums <= 0.0).any():
        raise ContractViolationError("every edge row needs a positive sum")
    out = e / sums
    return out[0] if single else out


# ---------------------------------------------------------------------------
# GCN: fixed, row-stochastic edges
# ---------------------------------------------------------------------------

@dataclass
class GcnCache:
    H: np.ndarray        # (B, N, F) inputs
    E: np.ndarray        # (B, N, N) edges
    M: np.ndarray        # (B, N, F) = E @ H
    pre: np.ndarray      # (B, N, K') preactivation
    single: bool


def gcn_forward(nodes: np.ndarray, edges: np.ndarray,
                params: GraphLayerParams):
    """h_i' = sigma(sum_j e_ij h_j W) with caller-normalized edges.

    Returns (out, cache).
    """
    if params.is_attention:
        raise ContractViolationError("gcn_forward takes a fixed-edge layer, "
                                     "this one has attention vectors")
    if params.heads != 1:
        raise ContractViolationError("fixed-edge layers are single-head")
    H, single = _batched(nodes, "nodes")
    E, e_single = _batched(edges, "edges")
    if e_single != single:
        raise ShapeError("nodes and edges must both be single or both batched")
    B, N, F = H.shape
    if E.shape != (B, N, N):
        raise ShapeError(f"edges shape {E.shape} != ({B}, {N}, {N})")
    W = params.W[0]
    if W.value.shape[0] != F:
        raise ShapeError(
            f"gcn weight shape {W.value.shape} incompatible with {F} features"
        )
    M = E @ H
    pre = M @ W.value
    out = activation_apply(params.activation, pre, params.slope)
    cache = GcnCache(H=H, E=E, M=M, pre=pre, single=single)
    return (out[0] if single else out), cache


def gcn_backward(cache: GcnCache, params: GraphLayerParams,
                 d_out: np.ndarray) -> np.ndarray:
    """Accumulate the W gradient; return the gradient w.r.t. nodes."""
    d_out, _ = _batched(d_out, "d_out")
    W = params.W[0]
    d_pre = d_out * activation_grad(params.activation, cache.pre, params.slope)
    W.grad += np.einsum("bnf,bnk->fk", cache.M, d_pre)
    d_M = d_pre @ W.value.T
    d_H = np.matmul(cache.E.transpose(0, 2, 1), d_M)
    return d_H[0] if cache.single else d_H


# ---------------------------------------------------------------------------
# GAT: learned attention coefficients
# ---------------------------------------------------------------------------

@dataclass
class GatHeadCache:
    g: np.ndarray        # (B, N, K') transformed nodes
    Z: np.ndarray        # (B, N, N) raw pair logits s_i + t_j
    att: np.ndarray      # (B, N, N) softmax rows
    pre: np.ndarray      # (B, N, K') aggregation preactivation


@dataclass
class GatCache:
    H: np.ndarray
    heads: List[GatHeadCache]
    single: bool


def _gat_head(H: np.ndarray, W: ParamTensor, a: ParamTensor,
              params: GraphLayerParams) -> GatHeadCache:
    g = H @ W.value                          # (B, N, K')
    k = W.value.shape[1]
    a_src = a.value[:k, 0]                   # pairs with the receiving node i
    a_dst = a.value[k:, 0]                   # pairs with the source node j
    s = g @ a_src                            # (B, N)
    t = g @ a_dst
    Z = s[:, :, None] + t[:, None, :]        # (B, N, N), entry (i, j)
    logits = np.where(Z > 0.0, Z, params.att_slope * Z)
    att = row_softmax(logits)
    pre = att @ g
    return GatHeadCache(g=g, Z=Z, att=att, pre=pre)


def gat_attention(nodes: np.ndarray, params: GraphLayerParams,
                  head: int = 0) -> np.ndarray:
    """Attention coefficient matrix for one head; rows sum to 1."""
    if not params.is_attention:
        raise ContractViolationError("layer has no attention vectors")
    H, single = _batched(nodes, "nodes")
    if H.shape[1] == 0:
        raise ContractViolationError("gat_attention needs at least one node")
    hc = _gat_head(H, params.W[head], params.a[head], params)
    return hc.att[0] if single else hc.att


def gat_forward(nodes: np.ndarray, params: GraphLayerParams):
    """Per-head attention transform, concatenated along the feature axis.

    Returns (out, attention, cache) where attention is one matrix per head.
    """
    if not params.is_attention:
        raise ContractViolationError("gat_forward needs attention vectors")
    H, single = _batched(nodes, "nodes")
    B, N, F = H.shape
    if N == 0:
        raise ContractViolationError("gat_forward needs at least one node")
    head_caches = []
    outs = []
    for W, a in zip(params.W, params.a):
        if W.value.shape[0] != F:
            raise ShapeError(
                f"gat weight shape {W.value.shape} incompatible with {F} features"
            )
        hc = _gat_head(H, W, a, params)
        head_caches.append(hc)
        outs.append(activation_apply(params.activation, hc.pre, params.slope))
    out = np.concatenate(outs, axis=-1)
    att = [hc.att for hc in head_caches]
    cache = GatCache(H=H, heads=head_caches, single=single)
    if single:
        return out[0], [m[0] for m in att], cache
    return out, att, cache


def gat_backward(cache: GatCache, params: GraphLayerParams,
                 d_out: np.ndarray) -> np.ndarray:
    """Backward through aggregation and the attention coefficients.

    e_ij depends on W and a, so both receive gradient contributions from
    the softmax path as well as the feature-aggregation path.
    """
    d_out, _ = _batched(d_out, "d_out")
    H = cache.H
    d_H = np.zeros_like(H)
    offset = 0
    for W, a, hc in zip(params.W, params.a, cache.heads):
        k = W.value.shape[1]
        d_head = d_out[:, :, offset:offset + k]
        offset += k
        d_pre = d_head * activation_grad(params.activation, hc.pre, params.slope)
        # aggregation: pre_i = sum_j att_ij g_j
        d_att = np.einsum("bik,bjk->bij", d_pre, hc.g)
        d_g = np.einsum("bij,bik->bjk", hc.att, d_pre)
        # softmax rows over j
        inner = (d_att * hc.att).sum(axis=-1, keepdims=True)
        d_logits = hc.att * (d_att - inner)
        d_Z = d_logits * leaky_relu_grad(hc.Z, params.att_slope)
        d_s = d_Z.sum(axis=2)               # (B, N) receiver side
        d_t = d_Z.sum(axis=1)               # (B, N) source side
        a_src = a.value[:k, 0]
        a_dst = a.value[k:, 0]
        a.grad[:k, 0] += np.einsum("bnk,bn->k", hc.g, d_s)
        a.grad[k:, 0] += np.einsum("bnk,bn->k", hc.g, d_t)
        d_g += d_s[:, :, None] * a_src + d_t[:, :, None] * a_dst
        W.grad += np.einsum("bnf,bnk->fk", H, d_g)
        d_H += d_g @ W.value.T
    return d_H[0] if cache.single else d_H


# ---------------------------------------------------------------------------
# Pooling
# ---------------------------------------------------------------------------

def global_average_pool(nodes: np.ndarray) -> np.ndarray:
    """Column-wise mean over nodes; permutation invariant."""
    x, single = _batched(nodes, "nodes")
    if x.shape[1] == 0:
        raise ContractViolationError("cannot pool an empty graph")
    out = x.mean(axis=1)
    return out[0] if single else out


def global_average_pool_backward(d_pooled: np.ndarray,
                                 n_nodes: int) -> np.ndarray:
    """Spread the pooled gradient evenly back over the node axis."""
    d = np.asarray(d_pooled, dtype=np.float64)
    single = d.ndim == 1
    if single:
        d = d[None, :]
    out = np.repeat(d[:, None, :], n_nodes, axis=1) / n_nodes
    return out[0] if single else out
