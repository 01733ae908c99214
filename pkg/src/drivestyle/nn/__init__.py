"""Minimal numpy neural-network toolkit with hand-written backpropagation.

Every layer computes exact analytic gradients that are verified against
central finite differences in the test suite.  Arrays are float64 by
default; float32 is available through the ``dtype`` arguments for speed.
"""

from .gradcheck import grad_check_layer, max_rel_error, numeric_gradient
from .layers import (
    AdaptiveMaxPool1d,
    BatchNorm1d,
    Conv1d,
    Dense,
    Dropout,
    Layer,
    ReLU,
    SelfAttention,
)
from .losses import cross_entropy, log_softmax, softmax
from .optim import AdamW
from .rng import rng_for

__all__ = [
    "AdamW",
    "AdaptiveMaxPool1d",
    "BatchNorm1d",
    "Conv1d",
    "Dense",
    "Dropout",
    "Layer",
    "ReLU",
    "SelfAttention",
    "cross_entropy",
    "grad_check_layer",
    "log_softmax",
    "max_rel_error",
    "numeric_gradient",
    "rng_for",
    "softmax",
]
