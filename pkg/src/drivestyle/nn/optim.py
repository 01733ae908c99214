"""AdamW with decoupled weight decay.

The decay step ``p *= (1 - lr * weight_decay)`` runs before the Adam
update, so a parameter with zero gradient is scaled by exactly that factor
per step.  Decay applies uniformly to every parameter handed to the
optimizer.
"""

from __future__ import annotations

import numpy as np

from ..errors import ConfigError
from .layers import Layer


class AdamW:
    def __init__(
        self,
        layers: list[Layer],
        lr: float = 2e-5,
        betas: tuple[float, float] = (0.9, 0.999),
        eps: float = 1e-8,
        weight_decay: float = 0.01,
    ):
        if lr <= 0:
            raise ConfigError(f"learning rate must be positive, got {lr}")
        if not (0 <= betas[0] < 1 and 0 <= betas[1] < 1):
            raise ConfigError(f"betas must lie in [0, 1), got {betas}")
        self.lr = lr
        self.beta1, self.beta2 = betas
        self.eps = eps
        self.weight_decay = weight_decay
        self.t = 0
        self._entries = []
        for layer in layers:
            for key in sorted(layer.params):
                param = layer.params[key]
                self._entries.append(
                    (layer, key, np.zeros_like(param), np.zeros_like(param))
                )

    def step(self) -> None:
        """One update over all parameters using the gradients currently
        stored on the layers."""
        self.t += 1
        bias1 = 1.0 - self.beta1**self.t
        bias2 = 1.0 - self.beta2**self.t
        for layer, key, m, v in self._entries:
            param = layer.params[key]
            grad = layer.grads.get(key)
            if grad is None:
                grad = np.zeros_like(param)
            param *= 1.0 - self.lr * self.weight_decay
            m *= self.beta1
            m += (1.0 - self.beta1) * grad
            v *= self.beta2
            v += (1.0 - self.beta2) * grad * grad
            m_hat = m / bias1
            v_hat = v / bias2
            param -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)
