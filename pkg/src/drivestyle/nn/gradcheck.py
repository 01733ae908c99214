"""Central finite-difference gradient verification.

The relative error between an analytic gradient ``a`` and its numeric
estimate ``n`` is ``|a - n| / max(1e-8, |a| + |n|)`` elementwise; a check
reports the maximum over all coordinates.
"""

from __future__ import annotations

from typing import Callable

import numpy as np

from .layers import Layer


def numeric_gradient(f: Callable[[], float], x: np.ndarray, h: float = 1e-5) -> np.ndarray:
    """Central differences of scalar ``f`` with respect to ``x`` in place.

    ``f`` must read the current contents of ``x``; each coordinate is
    perturbed by ``+-h`` and restored.
    """
    grad = np.zeros_like(x)
    flat = x.reshape(-1)
    gflat = grad.reshape(-1)
    for i in range(flat.size):
        original = flat[i]
        flat[i] = original + h
        f_plus = f()
        flat[i] = original - h
        f_minus = f()
        flat[i] = original
        gflat[i] = (f_plus - f_minus) / (2.0 * h)
    return grad


def max_rel_error(
    analytic: np.ndarray, numeric: np.ndarray, zero_atol: float = 1e-8
) -> float:
    """Maximum elementwise relative error with a floored denominator.

    Coordinates where both gradients are below ``zero_atol`` in magnitude
    count as exact agreement: a truly zero gradient (for example a bias
    whose effect is cancelled by a following batch norm) leaves only
    finite-difference cancellation noise, which the floored ratio would
    otherwise inflate.
    """
    analytic = np.asarray(analytic)
    numeric = np.asarray(numeric)
    denom = np.maximum(1e-8, np.abs(analytic) + np.abs(numeric))
    err = np.abs(analytic - numeric) / denom
    both_zero = (np.abs(analytic) < zero_atol) & (np.abs(numeric) < zero_atol)
    err = np.where(both_zero, 0.0, err)
    return float(np.max(err)) if err.size else 0.0


def grad_check_layer(
    layer: Layer,
    x: np.ndarray,
    h: float = 1e-5,
    train: bool = True,
    forward: Callable[[np.ndarray], np.ndarray] | None = None,
    seed: int = 0,
) -> dict[str, float]:
    """Check a layer's input and parameter gradients against central
    differences.

    The layer output is scalarized through a fixed random projection so a
    single backward pass yields every analytic gradient.  ``forward`` may
    override how the layer is invoked (needed for layers whose forward
    takes extra arguments, such as a dropout rng).  Returns the maximum
    relative error per parameter plus ``"input"``.
    """
    if forward is None:
        forward = lambda arr: layer.forward(arr, train=train)  # noqa: E731
    x = np.array(x, dtype=np.float64)
    y = forward(x)
    proj = np.random.Generator(np.random.Philox(seed)).standard_normal(y.shape)

    def loss() -> float:
        return float((proj * forward(x)).sum())

    # analytic pass with the exact same forward
    loss()
    dx = layer.backward(proj)
    analytic_params = {k: g.copy() for k, g in layer.grads.items()}

    errors: dict[str, float] = {}
    errors["input"] = max_rel_error(dx, numeric_gradient(loss, x, h))
    for key in layer.params:
        numeric = numeric_gradient(loss, layer.params[key], h)
        errors[key] = max_rel_error(analytic_params[key], numeric)
    return errors
