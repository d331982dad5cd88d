"""Dense numeric kernel: matrices, activations, losses, metrics, Adam.

Matrices are plain 2-D float64 numpy arrays (row-major). Every backward
pass in the package is hand-derived and must pass ``finite_diff_check``;
there is no autodiff graph here.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import (
    ContractViolationError,
    NonFiniteLossError,
    ShapeError,
    UndefinedMetricError,
)

DEFAULT_LEAKY_SLOPE = 0.2

# Probabilities fed to the BCE loss are clamped into this range so the
# loss stays finite for confident-but-wrong predictions.
BCE_CLAMP = 1e-7


def as_matrix(values, name: str = "matrix") -> np.ndarray:
    """Coerce to a 2-D float64 array, rejecting NaN/Inf entries."""
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 2:
        raise ShapeError(f"{name} must be 2-D, got shape {arr.shape}")
    if not np.isfinite(arr).all():
        raise ContractViolationError(f"{name} contains non-finite entries")
    return arr


@dataclass
class ParamTensor:
    """A trainable weight matrix with its gradient accumulator."""

    name: str
    value: np.ndarray
    grad: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        self.value = np.asarray(self.value, dtype=np.float64)
        if self.value.ndim != 2:
            raise ShapeError(
                f"param {self.name!r} must be 2-D, got shape {self.value.shape}"
            )
        if self.grad is None:
            self.grad = np.zeros_like(self.value)
        elif self.grad.shape != self.value.shape:
            raise ShapeError(
                f"param {self.name!r}: grad shape {self.grad.shape} "
                f"!= value shape {self.value.shape}"
            )

    def zero_grad(self) -> None:
        self.grad.fill(0.0)


@dataclass
class AdamState:
    """Per-parameter Adam accumulators and hyperparameters."""

    m: np.ndarray
    v: np.ndarray
    step_count: int = 0
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8

    @classmethod
    def for_param(cls, param: ParamTensor, lr: float = 1e-3,
                  beta1: float = 0.9, beta2: float = 0.999,
                  epsilon: float = 1e-8) -> "AdamState":
        return cls(m=np.zeros_like(param.value), v=np.zeros_like(param.value),
                   lr=lr, beta1=beta1, beta2=beta2, epsilon=epsilon)


def matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Matrix product with an explicit inner-dimension check."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim != 2 or b.ndim != 2:
        raise ShapeError(f"matmul needs 2-D operands, got {a.shape} and {b.shape}")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul shape mismatch: {a.shape} x {b.shape}")
    return a @ b


def leaky_relu(x, slope: float = DEFAULT_LEAKY_SLOPE):
    """Elementwise max(x, slope*x) for slope in (0, 1)."""
    if not 0.0 < slope < 1.0:
        raise ContractViolationError(f"leaky_relu slope must be in (0,1), got {slope}")
    x = np.asarray(x, dtype=np.float64)
    return np.where(x > 0.0, x, slope * x)


def leaky_relu_grad(x, slope: float = DEFAULT_LEAKY_SLOPE):
    """Derivative of leaky_relu; defined as 1 at exactly 0."""
    if not 0.0 < slope < 1.0:
        raise ContractViolationError(f"leaky_relu slope must be in (0,1), got {slope}")
    x = np.asarray(x, dtype=np.float64)
    return np.where(x >= 0.0, 1.0, slope)


def softmax(logits) -> np.ndarray:
    """Stable softmax over a 1-D sequence of finite logits."""
    arr = np.asarray(logits, dtype=np.float64)
    if arr.ndim != 1 or arr.size == 0:
        raise ContractViolationError(
            f"softmax needs a non-empty 1-D sequence, got shape {arr.shape}"
        )
    if not np.isfinite(arr).all():
        raise ContractViolationError("softmax input contains non-finite entries")
    shifted = arr - arr.max()
    e = np.exp(shifted)
    return e / e.sum()


def row_softmax(logits: np.ndarray) -> np.ndarray:
    """Stable softmax along the last axis of an n-D array."""
    shifted = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def sigmoid(x):
    """Numerically stable logistic function."""
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    if out.ndim == 0:
        return float(out)
    return out


# ---------------------------------------------------------------------------
# Activations, addressed by name so layer configs serialize as strings.
# ---------------------------------------------------------------------------

def activation_apply(name: str, x: np.ndarray,
                     slope: float = DEFAULT_LEAKY_SLOPE) -> np.ndarray:
    if name == "linear":
        return x
    if name == "leaky_relu":
        return leaky_relu(x, slope)
    if name == "sigmoid":
        return np.asarray(sigmoid(x))
    raise ContractViolationError(f"unknown activation {name!r}")


def activation_grad(name: str, x: np.ndarray,
                    slope: float = DEFAULT_LEAKY_SLOPE) -> np.ndarray:
    """Derivative of the named activation w.r.t. its preactivation x."""
    if name == "linear":
        return np.ones_like(x)
    if name == "leaky_relu":
        return leaky_relu_grad(x, slope)
    if name == "sigmoid":
        s = np.asarray(sigmoid(x))
        return s * (1.0 - s)
    raise ContractViolationError(f"unknown activation {name!r}")


# ---------------------------------------------------------------------------
# Dense layer
# ---------------------------------------------------------------------------

def dense_forward(h: np.ndarray, W: ParamTensor, b: Optional[ParamTensor],
                  activation: str = "linear",
                  slope: float = DEFAULT_LEAKY_SLOPE):
    """activation(h @ W + b) over rows of h.

    Returns (out, cache); pass the cache to dense_backward.
    """
    h = np.asarray(h, dtype=np.float64)
    if h.ndim != 2:
        raise ShapeError(f"dense input must be 2-D, got {h.shape}")
    if h.shape[1] != W.value.shape[0]:
        raise ShapeError(
            f"dense shape mismatch: input {h.shape} x weight {W.value.shape}"
        )
    pre = h @ W.value
    if b is not None:
        if b.value.shape != (1, W.value.shape[1]):
            raise ShapeError(
                f"dense bias shape {b.value.shape} != (1, {W.value.shape[1]})"
            )
        pre = pre + b.value
    out = activation_apply(activation, pre, slope)
    return out, (h, pre)


def dense_backward(cache, W: ParamTensor, b: Optional[ParamTensor],
                   d_out: np.ndarray, activation: str = "linear",
                   slope: float = DEFAULT_LEAKY_SLOPE) -> np.ndarray:
    """Accumulate exact gradients into W (and b); return gradient w.r.t. h."""
    h, pre = cache
    d_pre = d_out * activation_grad(activation, pre, slope)
    W.grad += h.T @ d_pre
    if b is not None:
        b.grad += d_pre.sum(axis=0, keepdims=True)
    return d_pre @ W.value.T


# ---------------------------------------------------------------------------
# Losses and metrics
# ---------------------------------------------------------------------------

def _paired(pred, target, op: str):
    p = np.asarray(pred, dtype=np.float64).ravel()
    t = np.asarray(target, dtype=np.float64).ravel()
    if p.size == 0:
        raise ContractViolationError(f"{op}: empty input")
    if p.size != t.size:
        raise ShapeError(f"{op}: length mismatch {p.size} vs {t.size}")
    return p, t


def loss_mse(pred, target) -> float:
    p, t = _paired(pred, target, "loss_mse")
    return float(np.mean((p - t) ** 2))


def loss_mse_grad(pred, target) -> np.ndarray:
    """d loss_mse / d pred, same shape as pred (flattened)."""
    p, t = _paired(pred, target, "loss_mse_grad")
    return 2.0 * (p - t) / p.size


def loss_mae(pred, target) -> float:
    p, t = _paired(pred, target, "loss_mae")
    return float(np.mean(np.abs(p - t)))


def loss_bce(pred, target) -> float:
    """Binary cross-entropy with probabilities clamped to [1e-7, 1-1e-7]."""
    p, t = _paired(pred, target, "loss_bce")
    p = np.clip(p, BCE_CLAMP, 1.0 - BCE_CLAMP)
    return float(-np.mean(t * np.log(p) + (1.0 - t) * np.log(1.0 - p)))


def loss_bce_logit_grad(prob, target) -> np.ndarray:
    """d loss_bce / d logit when prob = sigmoid(logit): (p - t) / n.

    Exact wherever the clamp is inactive; the training loop always pairs
    BCE with a sigmoid head, so this fused form avoids dividing by p(1-p).
    """
    p, t = _paired(prob, target, "loss_bce_logit_grad")
    return (p - t) / p.size


def metric_auc(scores, labels) -> float:
    """Probability a random positive outranks a random negative; ties 0.5.

    Computed from average ranks, which matches the brute-force
    concordant-pair count exactly (both numerators are sums of halves).
    """
    s = np.asarray(scores, dtype=np.float64).ravel()
    y = np.asarray(labels).ravel().astype(np.int64)
    if s.size != y.size:
        raise ShapeError(f"metric_auc: length mismatch {s.size} vs {y.size}")
    n_pos = int((y == 1).sum())
    n_neg = int((y == 0).sum())
    if n_pos == 0 or n_neg == 0:
        raise UndefinedMetricError(
            f"AUC undefined: need both classes, got {n_pos} positive / {n_neg} negative"
        )
    order = np.argsort(s, kind="stable")
    sorted_s = s[order]
    ranks = np.empty(s.size, dtype=np.float64)
    i = 0
    while i < s.size:
        j = i
        while j + 1 < s.size and sorted_s[j + 1] == sorted_s[i]:
            j += 1
        # average 1-based rank for the tie group [i, j]
        ranks[order[i:j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    rank_sum_pos = float(ranks[y == 1].sum())
    return (rank_sum_pos - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


# ---------------------------------------------------------------------------
# Optimizer
# ---------------------------------------------------------------------------

def adam_step(param: ParamTensor, state: AdamState) -> None:
    """One Adam update with bias correction, in place."""
    if state.m.shape != param.value.shape:
        raise ShapeError(
            f"adam state shape {state.m.shape} != param shape {param.value.shape}"
        )
    state.step_count += 1
    g = param.grad
    state.m = state.beta1 * state.m + (1.0 - state.beta1) * g
    state.v = state.beta2 * state.v + (1.0 - state.beta2) * (g * g)
    m_hat = state.m / (1.0 - state.beta1 ** state.step_count)
    v_hat = state.v / (1.0 - state.beta2 ** state.step_count)
    param.value -= state.lr * m_hat / (np.sqrt(v_hat) + state.epsilon)


# ---------------------------------------------------------------------------
# Finite-difference gradient checker
# ---------------------------------------------------------------------------

@dataclass
class GradCheckReport:
    passed: bool
    max_rel_error: float
    tol: float
    h: float
    worst_param: str
    worst_index: int
    n_entries: int

    def __str__(self):
        status = "PASS" if self.passed else "FAIL"
        return (f"gradcheck {status}: max rel err {self.max_rel_error:.3e} "
                f"(tol {self.tol:.1e}) at {self.worst_param}[{self.worst_index}] "
                f"over {self.n_entries} entries")


# Relative error uses max(|analytic|, |numeric|, REL_FLOOR) as denominator:
# below the floor, central-difference roundoff noise (~1e-9 at h=1e-6) would
# dominate a pure ratio and report spurious failures on near-zero gradients.
REL_FLOOR = 1e-3


def finite_diff_check(loss_fn: Callable[[], float],
                      params: Sequence[ParamTensor],
                      h: float = 1e-6, tol: float = 1e-5) -> GradCheckReport:
    """Compare each param's .grad against central finite differences.

    ``loss_fn`` must be a deterministic scalar function of the current
    parameter values; the caller is responsible for having populated the
    analytic gradients (one backward pass) before calling this.
    """
    worst = 0.0
    worst_param = ""
    worst_index = -1
    n_entries = 0
    for p in params:
        flat_v = p.value.ravel()
        flat_g = p.grad.ravel()
        for idx in range(flat_v.size):
            orig = flat_v[idx]
            flat_v[idx] = orig + h
            f_plus = float(loss_fn())
            flat_v[idx] = orig - h
            f_minus = float(loss_fn())
            flat_v[idx] = orig
            if not (np.isfinite(f_plus) and np.isfinite(f_minus)):
                raise NonFiniteLossError(
                    f"loss_fn returned non-finite value while perturbing "
                    f"{p.name}[{idx}]"
                )
            numeric = (f_plus - f_minus) / (2.0 * h)
            analytic = flat_g[idx]
            denom = max(abs(analytic), abs(numeric), REL_FLOOR)
            rel = abs(analytic - numeric) / denom
            n_entries += 1
            if rel > worst:
                worst = rel
                worst_param = p.name
                worst_index = idx
    return GradCheckReport(passed=worst < tol, max_rel_error=worst, tol=tol,
                           h=h, worst_param=worst_param,
                           worst_index=worst_index, n_entries=n_entries)
