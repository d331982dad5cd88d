import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from playgraph.errors import ShapeError, UndefinedMetricError
from playgraph.tensor import (
    AdamState,
    ParamTensor,
    activation_apply,
    activation_grad,
    adam_step,
    dense_backward,
    dense_forward,
    finite_diff_check,
    leaky_relu,
    leaky_relu_grad,
    loss_bce,
    loss_bce_logit_grad,
    loss_mae,
    loss_mse,
    loss_mse_grad,
    metric_auc,
    row_softmax,
    sigmoid,
    softmax,
)


def test_leaky_relu_values():
    x = np.array([-2.0, -0.5, 0.0, 0.5, 2.0])
    out = leaky_relu(x, 0.2)
    assert np.allclose(out, [-0.4, -0.1, 0.0, 0.5, 2.0])


def test_leaky_relu_grad_at_zero_is_one():
    # the derivative convention at the kink matters for finite-diff checks
    g = leaky_relu_grad(np.array([0.0]), 0.2)
    assert g[0] == 1.0


def test_sigmoid_extremes_stay_finite():
    x = np.array([-800.0, -30.0, 0.0, 30.0, 800.0])
    s = sigmoid(x)
    assert np.all(np.isfinite(s))
    assert s[0] >= 0.0 and s[-1] <= 1.0
    assert s[2] == 0.5


@given(arrays(np.float64, (4, 6), elements=st.floats(-50, 50)))
@settings(max_examples=50, deadline=None)
def test_row_softmax_rows_are_distributions(x):
    p = row_softmax(x)
    assert np.all(p >= 0)
    assert np.allclose(p.sum(axis=1), 1.0, atol=1e-12)


def test_softmax_shift_invariance():
    x = np.array([1.0, 2.0, 3.0])
    assert np.allclose(softmax(x), softmax(x + 123.4), atol=1e-12)


def test_loss_mse_hand_value():
    pred = np.array([1.0, 2.0, 3.0])
    target = np.array([0.0, 0.0, 0.0])
    # (1 + 4 + 9) / 3
    assert loss_mse(pred, target) == pytest.approx(14.0 / 3.0, abs=1e-12)
    assert loss_mae(pred, target) == pytest.approx(2.0, abs=1e-12)


def test_loss_mse_grad_matches_finite_difference():
    rng = np.random.default_rng(0)
    pred = rng.normal(size=7)
    target = rng.normal(size=7)
    g = loss_mse_grad(pred, target)
    h = 1e-7
    for i in range(7):
        bumped = pred.copy()
        bumped[i] += h
        num = (loss_mse(bumped, target) - loss_mse(pred, target)) / h
        assert g[i] == pytest.approx(num, abs=1e-5)


def test_loss_bce_known_value():
    # p = 0.5 on both classes gives log 2
    probs = np.array([0.5, 0.5])
    labels = np.array([0.0, 1.0])
    assert loss_bce(probs, labels) == pytest.approx(np.log(2.0), abs=1e-12)


def test_loss_bce_clamps_rather_than_inf():
    probs = np.array([0.0, 1.0])
    labels = np.array([1.0, 0.0])
    assert np.isfinite(loss_bce(probs, labels))


def test_bce_logit_grad_is_prob_minus_label_over_n():
    probs = np.array([0.9, 0.2, 0.5, 0.5])
    labels = np.array([1.0, 0.0, 1.0, 0.0])
    g = loss_bce_logit_grad(probs, labels)
    assert np.allclose(g, (probs - labels) / 4.0, atol=1e-15)


def test_mismatched_loss_shapes_raise():
    with pytest.raises(ShapeError):
        loss_mse(np.zeros(3), np.zeros(4))


# ---------------------------------------------------------------------------
# AUC
# ---------------------------------------------------------------------------

def brute_force_auc(scores, labels):
    """O(n^2) pair counting with half credit for ties."""
    pos = [s for s, y in zip(scores, labels) if y == 1]
    neg = [s for s, y in zip(scores, labels) if y == 0]
    total = 0.0
    for p in pos:
        for n in neg:
            if p > n:
                total += 1.0
            elif p == n:
                total += 0.5
    return total / (len(pos) * len(neg))


def test_auc_perfect_and_inverted():
    labels = np.array([0, 0, 1, 1], dtype=float)
    assert metric_auc(np.array([0.1, 0.2, 0.8, 0.9]), labels) == 1.0
    assert metric_auc(np.array([0.9, 0.8, 0.2, 0.1]), labels) == 0.0


def test_auc_with_ties_matches_pair_counting():
    rng = np.random.default_rng(5)
    for _ in range(25):
        n = int(rng.integers(4, 30))
        scores = np.round(rng.random(n), 1)  # coarse grid forces ties
        labels = rng.integers(0, 2, n).astype(float)
        if labels.min() == labels.max():
            labels[0] = 1.0 - labels[0]
        assert metric_auc(scores, labels) == pytest.approx(
            brute_force_auc(scores, labels), abs=1e-12)


def test_auc_single_class_is_undefined():
    with pytest.raises(UndefinedMetricError):
        metric_auc(np.array([0.1, 0.9]), np.array([1.0, 1.0]))


# ---------------------------------------------------------------------------
# Dense layer and Adam
# ---------------------------------------------------------------------------

def test_dense_forward_linear_identity():
    h = np.array([[1.0, 2.0]])
    W = ParamTensor("W", np.eye(2))
    b = ParamTensor("b", np.zeros((1, 2)))
    out, _ = dense_forward(h, W, b, "linear")
    assert np.allclose(out, h)


def test_dense_backward_gradcheck():
    rng = np.random.default_rng(3)
    h = rng.normal(size=(5, 4))
    W = ParamTensor("W", rng.normal(size=(4, 3)) * 0.3)
    b = ParamTensor("b", rng.normal(size=(1, 3)) * 0.1)
    target = rng.normal(size=(5, 3))

    def loss():
        out, _ = dense_forward(h, W, b, "leaky_relu")
        return loss_mse(out, target)

    out, cache = dense_forward(h, W, b, "leaky_relu")
    d_out = loss_mse_grad(out, target).reshape(5, 3)
    dense_backward(cache, W, b, d_out, "leaky_relu")
    report = finite_diff_check(loss, [W, b])
    assert report.passed, report


def test_adam_first_step_size_is_lr():
    # with fresh moments the first update is lr * sign(grad) regardless of size
    p = ParamTensor("p", np.array([[1.0, -2.0]]))
    p.grad = np.array([[1e-4, -3.0]])
    state = AdamState.for_param(p, lr=0.05)
    adam_step(p, state)
    assert np.allclose(np.abs(p.value - np.array([[1.0, -2.0]])), 0.05,
                       atol=1e-4)


def test_adam_converges_on_quadratic():
    p = ParamTensor("p", np.array([[5.0]]))
    state = AdamState.for_param(p, lr=0.1)
    for _ in range(400):
        p.grad = 2.0 * p.value
        adam_step(p, state)
    assert abs(p.value[0, 0]) < 1e-3


def test_activation_round_trip_names():
    x = np.linspace(-2, 2, 9)
    for name in ("linear", "leaky_relu", "sigmoid"):
        y = activation_apply(name, x)
        g = activation_grad(name, x)
        assert y.shape == x.shape and g.shape == x.shape
    with pytest.raises(ValueError):
        activation_apply("tanh", x)


def test_finite_diff_check_catches_a_wrong_gradient():
    p = ParamTensor("p", np.array([[1.5]]))

    def loss():
        return float(p.value[0, 0] ** 2)

    p.grad = np.array([[1.0]])  # wrong on purpose, true grad is 3.0
    report = finite_diff_check(loss, [p])
    assert not report.passed
    assert report.worst_param == "p"
