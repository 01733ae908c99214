"""Layer-by-layer gradient checks and optimizer/loss anchors."""

import math

import numpy as np
import pytest

from drivestyle.errors import (
    BadLabelError,
    BadRateError,
    DegenerateBatchError,
    EvenKernelError,
    ShapeMismatchError,
)
from drivestyle.nn import (
    AdamW,
    AdaptiveMaxPool1d,
    BatchNorm1d,
    Conv1d,
    Dense,
    Dropout,
    ReLU,
    SelfAttention,
    cross_entropy,
    grad_check_layer,
    max_rel_error,
    numeric_gradient,
    rng_for,
    softmax,
)

TOL = 1e-6
TOL_LOOSE = 1e-5  # batchnorm and attention


def rng(seed=0):
    return np.random.default_rng(seed)


# ---------------------------------------------------------------------------
# gradient checks per layer


def test_dense_gradients():
    layer = Dense("d", 7, 5, rng_for(1, "init"))
    errors = grad_check_layer(layer, rng(0).standard_normal((4, 7)))
    assert max(errors.values()) <= TOL, errors


def test_relu_gradients():
    layer = ReLU()
    x = rng(1).standard_normal((6, 9)) + 0.05  # keep away from the kink
    errors = grad_check_layer(layer, x)
    assert max(errors.values()) <= TOL, errors


def test_conv1d_gradients():
    for kernel in (3, 5, 7):
        layer = Conv1d("c", 3, 4, kernel, rng_for(2, "init"))
        errors = grad_check_layer(layer, rng(2).standard_normal((2, 3, 11)))
        assert max(errors.values()) <= TOL, (kernel, errors)


def test_batchnorm_train_gradients():
    layer = BatchNorm1d("bn", 4)
    errors = grad_check_layer(layer, rng(3).standard_normal((3, 4, 6)), train=True)
    assert max(errors.values()) <= TOL_LOOSE, errors


def test_batchnorm_eval_gradients():
    layer = BatchNorm1d("bn", 4)
    # push running stats away from the init values first
    layer.forward(rng(4).standard_normal((5, 4, 7)), train=True)
    errors = grad_check_layer(layer, rng(5).standard_normal((3, 4, 6)), train=False)
    assert max(errors.values()) <= TOL_LOOSE, errors


def test_attention_gradients():
    layer = SelfAttention("attn", channels=6, d_k=4, rng=rng_for(6, "init"))
    errors = grad_check_layer(layer, rng(6).standard_normal((2, 5, 6)))
    assert max(errors.values()) <= TOL_LOOSE, errors


def test_adaptive_pool_gradients():
    layer = AdaptiveMaxPool1d("pool", 3)
    # distinct values keep the argmax stable under +-h perturbation
    x = rng(7).permutation(2 * 4 * 11).astype(float).reshape(2, 4, 11)
    errors = grad_check_layer(layer, x)
    assert max(errors.values()) <= TOL, errors


def test_dropout_gradients_with_frozen_mask():
    layer = Dropout("drop", 0.4)

    def forward(arr):
        return layer.forward(arr, train=True, rng=rng_for(99, "dropout"))

    errors = grad_check_layer(layer, rng(8).standard_normal((5, 6)), forward=forward)
    assert max(errors.values()) <= TOL, errors


def test_cross_entropy_gradient_matches_finite_differences():
    logits = rng(9).standard_normal((5, 4))
    labels = np.array([0, 3, 1, 2, 2])
    _, analytic = cross_entropy(logits, labels)

    def loss():
        value, _ = cross_entropy(logits, labels)
        return value

    numeric = numeric_gradient(loss, logits)
    assert max_rel_error(analytic, numeric) <= TOL


# ---------------------------------------------------------------------------
# loss and softmax anchors


def test_cross_entropy_uniform_logits_is_log4():
    logits = np.zeros((3, 4))
    loss, grad = cross_entropy(logits, np.array([0, 1, 2]))
    assert loss == pytest.approx(math.log(4.0), abs=1e-12)
    # gradient rows: softmax(0)=1/4 minus onehot, averaged over batch
    assert grad[0] == pytest.approx([(0.25 - 1) / 3, 0.25 / 3, 0.25 / 3, 0.25 / 3])


def test_cross_entropy_shift_invariance_extreme_logits():
    logits = np.array([[1000.0, 0.0, -1000.0, 500.0]])
    loss, _ = cross_entropy(logits, np.array([0]))
    assert np.isfinite(loss)
    loss_shifted, _ = cross_entropy(logits - 1000.0, np.array([0]))
    assert loss == pytest.approx(loss_shifted, abs=1e-9)


def test_cross_entropy_rejects_bad_labels():
    logits = np.zeros((2, 4))
    with pytest.raises(BadLabelError):
        cross_entropy(logits, np.array([0, 4]))
    with pytest.raises(BadLabelError):
        cross_entropy(logits, np.array([-1, 0]))
    with pytest.raises(ShapeMismatchError):
        cross_entropy(logits, np.array([0, 1, 2]))


def test_softmax_rows_sum_to_one():
    x = rng(10).standard_normal((50, 4)) * 100
    p = softmax(x, axis=1)
    assert np.max(np.abs(p.sum(axis=1) - 1.0)) <= 1e-9
    assert np.all(p >= 0)


# ---------------------------------------------------------------------------
# optimizer oracles


def test_adamw_zero_gradient_scales_by_decay_factor():
    layer = Dense("d", 3, 2, rng_for(0, "init"))
    before = {k: v.copy() for k, v in layer.params.items()}
    layer.grads = {k: np.zeros_like(v) for k, v in layer.params.items()}
    lr, wd = 2e-5, 0.01
    optimizer = AdamW([layer], lr=lr, weight_decay=wd)
    optimizer.step()
    factor = 1.0 - lr * wd
    for key in before:
        assert np.array_equal(layer.params[key], before[key] * factor), key


def test_adamw_matches_hand_stepped_reference():
    """Three steps on a fixed quadratic, against an independently coded
    per-scalar AdamW reference."""
    w0 = np.array([1.5, -2.0, 0.5])
    target = np.array([0.0, 1.0, -1.0])
    lr, wd, b1, b2, eps = 0.1, 0.01, 0.9, 0.999, 1e-8

    layer = Dense("d", 3, 1, rng_for(0, "init"))
    layer.params["W"] = w0.reshape(1, 3).copy()
    layer.params["b"] = np.zeros(1)
    optimizer = AdamW([layer], lr=lr, betas=(b1, b2), eps=eps, weight_decay=wd)

    # reference implementation: plain python floats
    ref = list(w0)
    m = [0.0, 0.0, 0.0]
    v = [0.0, 0.0, 0.0]
    for t in range(1, 4):
        grads = [w - tgt for w, tgt in zip(ref, target)]
        layer.grads["W"] = (layer.params["W"][0] - target).reshape(1, 3)
        layer.grads["b"] = np.zeros(1)
        for i in range(3):
            ref[i] *= 1.0 - lr * wd
            m[i] = b1 * m[i] + (1 - b1) * grads[i]
            v[i] = b2 * v[i] + (1 - b2) * grads[i] ** 2
            m_hat = m[i] / (1 - b1**t)
            v_hat = v[i] / (1 - b2**t)
            ref[i] -= lr * m_hat / (math.sqrt(v_hat) + eps)
        optimizer.step()
        assert layer.params["W"][0] == pytest.approx(ref, rel=1e-12), f"step {t}"


def test_adamw_first_step_size_is_learning_rate_for_unit_gradient():
    # with zero decay, bias correction makes the first step exactly
    # lr * g / (|g| + eps * sqrt(1-b2))  ~= lr * sign(g)
    layer = Dense("d", 2, 1, rng_for(0, "init"))
    layer.params["W"] = np.zeros((1, 2))
    layer.params["b"] = np.zeros(1)
    layer.grads = {"W": np.array([[1.0, -1.0]]), "b": np.zeros(1)}
    optimizer = AdamW([layer], lr=0.5, weight_decay=0.0)
    optimizer.step()
    assert layer.params["W"][0] == pytest.approx([-0.5, 0.5], rel=1e-6)


# ---------------------------------------------------------------------------
# layer behavior


def test_dropout_eval_is_identity_and_train_preserves_scale():
    layer = Dropout("drop", 0.3)
    x = np.ones((2000, 10))
    assert np.array_equal(layer.forward(x, train=False), x)
    y = layer.forward(x, train=True, rng=rng_for(1, "dropout"))
    kept = y[y > 0]
    assert kept[0] == pytest.approx(1.0 / 0.7)
    # inverted scaling keeps the expectation near one
    assert float(y.mean()) == pytest.approx(1.0, abs=0.02)


def test_dropout_rate_zero_is_identity_without_rng():
    layer = Dropout("drop", 0.0)
    x = rng(3).standard_normal((4, 4))
    assert np.array_equal(layer.forward(x, train=True), x)


def test_dropout_rejects_bad_rate():
    with pytest.raises(BadRateError):
        Dropout("drop", 1.0)
    with pytest.raises(BadRateError):
        Dropout("drop", -0.1)


def test_conv1d_matches_triple_loop_oracle():
    layer = Conv1d("c", 2, 3, 5, rng_for(12, "init"))
    x = rng(12).standard_normal((2, 2, 9))
    y = layer.forward(x)
    w, b = layer.params["W"], layer.params["b"]
    pad = 2
    batch, _, length = x.shape
    for bi in range(batch):
        for o in range(3):
            for pos in range(length):
                acc = b[o]
                for c in range(2):
                    for k in range(5):
                        src = pos + k - pad
                        if 0 <= src < length:
                            acc += w[o, c, k] * x[bi, c, src]
                assert y[bi, o, pos] == pytest.approx(acc, rel=1e-12)


def test_conv1d_rejects_even_kernel():
    with pytest.raises(EvenKernelError):
        Conv1d("c", 1, 1, 4, rng_for(0, "init"))


def test_conv1d_preserves_length():
    for kernel in (3, 5, 7):
        layer = Conv1d("c", 1, 2, kernel, rng_for(0, "init"))
        assert layer.forward(np.zeros((1, 1, 13))).shape == (1, 2, 13)


def test_batchnorm_normalizes_batch_and_updates_running_stats():
    layer = BatchNorm1d("bn", 2)
    x = rng(13).normal(5.0, 3.0, size=(8, 2, 10))
    y = layer.forward(x, train=True)
    assert y.mean(axis=(0, 2)) == pytest.approx([0, 0], abs=1e-10)
    assert y.var(axis=(0, 2)) == pytest.approx([1, 1], rel=1e-3)
    expected_mean = 0.9 * 0.0 + 0.1 * x.mean(axis=(0, 2))
    expected_var = 0.9 * 1.0 + 0.1 * x.var(axis=(0, 2))
    assert layer.buffers["running_mean"] == pytest.approx(expected_mean, rel=1e-12)
    assert layer.buffers["running_var"] == pytest.approx(expected_var, rel=1e-12)


def test_batchnorm_eval_uses_running_stats():
    layer = BatchNorm1d("bn", 1)
    layer.buffers["running_mean"][:] = 2.0
    layer.buffers["running_var"][:] = 4.0
    x = np.full((1, 1, 3), 4.0)
    y = layer.forward(x, train=False)
    assert y == pytest.approx((4.0 - 2.0) / np.sqrt(4.0 + 1e-5), rel=1e-9)


def test_batchnorm_rejects_degenerate_batch():
    layer = BatchNorm1d("bn", 2)
    with pytest.raises(DegenerateBatchError):
        layer.forward(np.zeros((1, 2, 1)), train=True)


def test_adaptive_pool_bins_and_tie_break():
    layer = AdaptiveMaxPool1d("pool", 2)
    x = np.array([[[1.0, 5.0, 5.0, 2.0, 7.0, 7.0]]])
    y = layer.forward(x)
    assert y[0, 0].tolist() == [5.0, 7.0]
    # first maximal index wins within each bin
    assert layer._argmax[0, 0].tolist() == [1, 4]


def test_adaptive_pool_identity_when_out_equals_in():
    layer = AdaptiveMaxPool1d("pool", 6)
    x = rng(14).standard_normal((2, 3, 6))
    assert np.array_equal(layer.forward(x), x)


def test_attention_weights_rows_sum_to_one():
    layer = SelfAttention("attn", channels=4, d_k=3, rng=rng_for(15, "init"))
    layer.forward(rng(15).standard_normal((2, 6, 4)))
    _, _, _, _, weights, _ = layer._cache
    assert weights.sum(axis=-1) == pytest.approx(np.ones((2, 6)), abs=1e-9)


def test_attention_is_permutation_equivariant():
    """Without positional encodings, permuting positions permutes outputs."""
    layer = SelfAttention("attn", channels=4, d_k=3, rng=rng_for(16, "init"))
    x = rng(16).standard_normal((1, 5, 4))
    perm = np.array([3, 0, 4, 1, 2])
    y = layer.forward(x)
    y_perm = layer.forward(x[:, perm, :])
    assert y_perm == pytest.approx(y[:, perm, :], rel=1e-10)


def test_state_round_trip_is_exact():
    layer = Conv1d("c", 2, 3, 3, rng_for(17, "init"))
    state = {k: v.copy() for k, v in layer.state().items()}
    fresh = Conv1d("c", 2, 3, 3, rng_for(99, "init"))
    fresh.load_state(state)
    for key, value in layer.state().items():
        assert np.array_equal(fresh.state()[key], value)
