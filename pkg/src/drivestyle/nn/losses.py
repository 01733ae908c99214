"""Softmax and cross-entropy with numerically stable log-sum-exp."""

from __future__ import annotations

import numpy as np

from ..errors import BadLabelError, ShapeMismatchError


def softmax(logits: np.ndarray, axis: int = -1) -> np.ndarray:
    """Shift-invariant softmax; rows sum to one."""
    shifted = logits - np.max(logits, axis=axis, keepdims=True)
    exp = np.exp(shifted)
    return exp / exp.sum(axis=axis, keepdims=True)


def log_softmax(logits: np.ndarray, axis: int = -1) -> np.ndarray:
    shifted = logits - np.max(logits, axis=axis, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=axis, keepdims=True))


def cross_entropy(logits: np.ndarray, labels: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean cross-entropy over a batch and its gradient in the logits.

    ``logits`` is ``[batch, classes]``; ``labels`` is an int vector in
    ``[0, classes)``.  The gradient is ``(softmax - onehot) / batch``.
    """
    if logits.ndim != 2:
        raise ShapeMismatchError(f"logits must be 2-d, got {logits.shape}")
    batch, n_classes = logits.shape
    labels = np.asarray(labels)
    if labels.shape != (batch,):
        raise ShapeMismatchError(
            f"labels shape {labels.shape} does not match batch {batch}"
        )
    labels = labels.astype(np.int64)
    if labels.size:
        low, high = int(labels.min()), int(labels.max())
        if low < 0 or high >= n_classes:
            bad = low if low < 0 else high
            raise BadLabelError(bad, n_classes)
    logp = log_softmax(logits, axis=1)
    loss = float(-logp[np.arange(batch), labels].mean())
    grad = softmax(logits, axis=1)
    grad[np.arange(batch), labels] -= 1.0
    grad /= batch
    return loss, grad
