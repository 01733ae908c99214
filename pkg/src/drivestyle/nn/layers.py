"""Layers with explicit forward and backward passes.

Conventions: dense inputs are ``[batch, features]``; convolutional inputs
are ``[batch, channels, length]``; attention inputs are
``[batch, length, channels]``.  ``forward`` caches whatever ``backward``
needs; ``backward`` takes the gradient of the loss with respect to the
layer output, stores parameter gradients in ``self.grads`` and returns the
gradient with respect to the layer input.
"""

from __future__ import annotations

import numpy as np

from ..errors import (
    BadRateError,
    ConfigError,
    DegenerateBatchError,
    EvenKernelError,
    ShapeMismatchError,
)
from .losses import softmax


class Layer:
    """Common storage for parameters, gradients and state buffers."""

    def __init__(self, name: str):
        self.name = name
        self.params: dict[str, np.ndarray] = {}
        self.grads: dict[str, np.ndarray] = {}
        self.buffers: dict[str, np.ndarray] = {}

    def forward(self, x: np.ndarray, train: bool = False) -> np.ndarray:
        raise NotImplementedError

    def backward(self, dout: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def state(self) -> dict[str, np.ndarray]:
        """Trainable parameters plus persistent buffers, keyed by name."""
        out = {f"{self.name}.{k}": v for k, v in self.params.items()}
        out.update({f"{self.name}.{k}": v for k, v in self.buffers.items()})
        return out

    def load_state(self, state: dict[str, np.ndarray]) -> None:
        for store in (self.params, self.buffers):
            for key, current in store.items():
                full = f"{self.name}.{key}"
                if full not in state:
                    raise ShapeMismatchError(f"missing tensor {full} in state")
                incoming = np.asarray(state[full])
                if incoming.shape != current.shape:
                    raise ShapeMismatchError(
                        f"tensor {full} has shape {incoming.shape}, "
                        f"expected {current.shape}"
                    )
                current[...] = incoming.astype(current.dtype)

    @property
    def param_count(self) -> int:
        return sum(int(p.size) for p in self.params.values())


class Dense(Layer):
    """Affine map ``y = x @ W.T + b`` with ``W`` of shape ``[out, in]``."""

    def __init__(self, name: str, in_dim: int, out_dim: int, rng, dtype=np.float64):
        super().__init__(name)
        scale = np.sqrt(2.0 / in_dim)
        self.in_dim = in_dim
        self.out_dim = out_dim
        self.params["W"] = (rng.standard_normal((out_dim, in_dim)) * scale).astype(dtype)
        self.params["b"] = np.zeros(out_dim, dtype=dtype)

    def forward(self, x: np.ndarray, train: bool = False) -> np.ndarray:
        if x.ndim != 2 or x.shape[1] != self.in_dim:
            raise ShapeMismatchError(
                f"{self.name}: expected [batch, {self.in_dim}], got {x.shape}"
            )
        self._x = x
        return x @ self.params["W"].T + self.params["b"]

    def backward(self, dout: np.ndarray) -> np.ndarray:
        self.grads["W"] = dout.T @ self._x
        self.grads["b"] = dout.sum(axis=0)
        return dout @ self.params["W"]


class ReLU(Layer):
    def __init__(self, name: str = "relu"):
        super().__init__(name)

    def forward(self, x: np.ndarray, train: bool = False) -> np.ndarray:
        self._mask = x > 0
        return np.where(self._mask, x, 0.0)

    def backward(self, dout: np.ndarray) -> np.ndarray:
        return np.where(self._mask, dout, 0.0)


class Dropout(Layer):
    """Inverted dropout: active units are scaled by ``1/(1-rate)`` during
    training so evaluation is the identity.  A rate of zero consumes no
    randomness."""

    def __init__(self, name: str, rate: float):
        super().__init__(name)
        if not 0.0 <= rate < 1.0:
            raise BadRateError(rate)
        self.rate = rate

    def forward(self, x: np.ndarray, train: bool = False, rng=None) -> np.ndarray:
        if not train or self.rate == 0.0:
            self._mask = None
            return x
        if rng is None:
            raise ConfigError(f"{self.name}: training forward needs an rng")
        keep = 1.0 - self.rate
        self._mask = (rng.random(x.shape) >= self.rate) / keep
        return x * self._mask

    def backward(self, dout: np.ndarray) -> np.ndarray:
        if self._mask is None:
            return dout
        return dout * self._mask


class Conv1d(Layer):
    """Same-length 1-d cross-correlation with odd kernels, stride 1 and
    zero padding.  ``W`` has shape ``[out_channels, in_channels, kernel]``."""

    def __init__(
        self,
        name: str,
        in_channels: int,
        out_channels: int,
        kernel: int,
        rng,
        dtype=np.float64,
    ):
        super().__init__(name)
        if kernel % 2 == 0:
            raise EvenKernelError(kernel)
        self.in_channels = in_channels
        self.out_channels = out_channels
        self.kernel = kernel
        fan_in = in_channels * kernel
        scale = np.sqrt(2.0 / fan_in)
        self.params["W"] = (
            rng.standard_normal((out_channels, in_channels, kernel)) * scale
        ).astype(dtype)
        self.params["b"] = np.zeros(out_channels, dtype=dtype)

    def forward(self, x: np.ndarray, train: bool = False) -> np.ndarray:
        if x.ndim != 3 or x.shape[1] != self.in_channels:
            raise ShapeMismatchError(
                f"{self.name}: expected [batch, {self.in_channels}, length], "
                f"got {x.shape}"
            )
        batch, _, length = x.shape
        pad = (self.kernel - 1) // 2
        xp = np.pad(x, ((0, 0), (0, 0), (pad, pad)))
        # window view [batch, in, kernel, length]
        cols = np.stack([xp[:, :, i : i + length] for i in range(self.kernel)], axis=2)
        self._cols = cols
        self._in_shape = x.shape
        y = np.einsum("oik,bikl->bol", self.params["W"], cols, optimize=True)
        return y + self.params["b"][None, :, None]

    def backward(self, dout: np.ndarray) -> np.ndarray:
        batch, _, length = self._in_shape
        pad = (self.kernel - 1) // 2
        self.grads["W"] = np.einsum("bol,bikl->oik", dout, self._cols, optimize=True)
        self.grads["b"] = dout.sum(axis=(0, 2))
        dcols = np.einsum("bol,oik->bikl", dout, self.params["W"], optimize=True)
        dxp = np.zeros((batch, self.in_channels, length + 2 * pad))
        for i in range(self.kernel):
            dxp[:, :, i : i + length] += dcols[:, :, i, :]
        return dxp[:, :, pad : pad + length]


class BatchNorm1d(Layer):
    """Per-channel batch normalization over ``[batch, channels, length]``.

    Training normalizes with biased batch statistics over the batch and
    length axes and updates running statistics as
    ``running = (1 - momentum) * running + momentum * batch``.  Evaluation
    normalizes with the running statistics.
    """

    def __init__(
        self,
        name: str,
        channels: int,
        momentum: float = 0.1,
        eps: float = 1e-5,
        dtype=np.float64,
    ):
        super().__init__(name)
        self.channels = channels
        self.momentum = momentum
        self.eps = eps
        self.params["gamma"] = np.ones(channels, dtype=dtype)
        self.params["beta"] = np.zeros(channels, dtype=dtype)
        self.buffers["running_mean"] = np.zeros(channels, dtype=dtype)
        self.buffers["running_var"] = np.ones(channels, dtype=dtype)

    def forward(self, x: np.ndarray, train: bool = False) -> np.ndarray:
        if x.ndim != 3 or x.shape[1] != self.channels:
            raise ShapeMismatchError(
                f"{self.name}: expected [batch, {self.channels}, length], got {x.shape}"
            )
        gamma = self.params["gamma"][None, :, None]
        beta = self.params["beta"][None, :, None]
        if not train:
            self._train_cache = None
            inv = 1.0 / np.sqrt(self.buffers["running_var"] + self.eps)
            self._eval_xhat = (x - self.buffers["running_mean"][None, :, None]) * inv[
                None, :, None
            ]
            return gamma * self._eval_xhat + beta
        n = x.shape[0] * x.shape[2]
        if n < 2:
            raise DegenerateBatchError(
                f"{self.name}: batch*length = {n}, need at least 2 for batch stats"
            )
        mean = x.mean(axis=(0, 2))
        var = x.var(axis=(0, 2))
        inv_std = 1.0 / np.sqrt(var + self.eps)
        xhat = (x - mean[None, :, None]) * inv_std[None, :, None]
        self._train_cache = (xhat, inv_std, n)
        self.buffers["running_mean"] = (
            (1.0 - self.momentum) * self.buffers["running_mean"] + self.momentum * mean
        )
        self.buffers["running_var"] = (
            (1.0 - self.momentum) * self.buffers["running_var"] + self.momentum * var
        )
        return gamma * xhat + beta

    def backward(self, dout: np.ndarray) -> np.ndarray:
        gamma = self.params["gamma"][None, :, None]
        if self._train_cache is None:
            self.grads["gamma"] = (dout * self._eval_xhat).sum(axis=(0, 2))
            self.grads["beta"] = dout.sum(axis=(0, 2))
            inv = 1.0 / np.sqrt(self.buffers["running_var"] + self.eps)
            return dout * gamma * inv[None, :, None]
        xhat, inv_std, n = self._train_cache
        self.grads["gamma"] = (dout * xhat).sum(axis=(0, 2))
        self.grads["beta"] = dout.sum(axis=(0, 2))
        dxhat = dout * gamma
        sum_dxhat = dxhat.sum(axis=(0, 2), keepdims=True)
        sum_dxhat_xhat = (dxhat * xhat).sum(axis=(0, 2), keepdims=True)
        return (
            inv_std[None, :, None]
            / n
            * (n * dxhat - sum_dxhat - xhat * sum_dxhat_xhat)
        )


class SelfAttention(Layer):
    """Single-head scaled dot-product self-attention over positions.

    Input ``[batch, length, channels]`` is mapped through bias-free query,
    key and value projections of width ``d_k``; attention weights are
    ``softmax(Q K^T / sqrt(d_k))`` row-wise over key positions.
    """

    def __init__(self, name: str, channels: int, d_k: int, rng, dtype=np.float64):
        super().__init__(name)
        self.channels = channels
        self.d_k = d_k
        limit = np.sqrt(6.0 / (channels + d_k))
        for key in ("Wq", "Wk", "Wv"):
            self.params[key] = rng.uniform(-limit, limit, size=(d_k, channels)).astype(
                dtype
            )

    def forward(self, x: np.ndarray, train: bool = False) -> np.ndarray:
        if x.ndim != 3 or x.shape[2] != self.channels:
            raise ShapeMismatchError(
                f"{self.name}: expected [batch, length, {self.channels}], got {x.shape}"
            )
        q = x @ self.params["Wq"].T
        k = x @ self.params["Wk"].T
        v = x @ self.params["Wv"].T
        scale = 1.0 / np.sqrt(self.d_k)
        scores = np.matmul(q, np.swapaxes(k, 1, 2)) * scale
        weights = softmax(scores, axis=-1)
        self._cache = (x, q, k, v, weights, scale)
        return np.matmul(weights, v)

    def backward(self, dout: np.ndarray) -> np.ndarray:
        x, q, k, v, weights, scale = self._cache
        dweights = np.matmul(dout, np.swapaxes(v, 1, 2))
        dv = np.matmul(np.swapaxes(weights, 1, 2), dout)
        # softmax backward, row-wise over the key axis
        dscores = weights * (dweights - (dweights * weights).sum(axis=-1, keepdims=True))
        dscores *= scale
        dq = np.matmul(dscores, k)
        dk = np.matmul(np.swapaxes(dscores, 1, 2), q)
        self.grads["Wq"] = np.einsum("bld,blc->dc", dq, x, optimize=True)
        self.grads["Wk"] = np.einsum("bld,blc->dc", dk, x, optimize=True)
        self.grads["Wv"] = np.einsum("bld,blc->dc", dv, x, optimize=True)
        return dq @ self.params["Wq"] + dk @ self.params["Wk"] + dv @ self.params["Wv"]


class AdaptiveMaxPool1d(Layer):
    """Max pooling to a fixed output length with floor-boundary bins.

    Bin ``i`` covers input positions ``floor(i*L/out)`` up to but not
    including ``floor((i+1)*L/out)``; ties take the first maximal index.
    """

    def __init__(self, name: str, out_len: int):
        super().__init__(name)
        if out_len < 1:
            raise ConfigError(f"{self.name}: out_len must be positive")
        self.out_len = out_len

    def forward(self, x: np.ndarray, train: bool = False) -> np.ndarray:
        if x.ndim != 3:
            raise ShapeMismatchError(f"{self.name}: expected 3-d input, got {x.shape}")
        batch, channels, length = x.shape
        if length < self.out_len:
            raise ShapeMismatchError(
                f"{self.name}: length {length} shorter than out_len {self.out_len}"
            )
        out = np.empty((batch, channels, self.out_len))
        argmax = np.empty((batch, channels, self.out_len), dtype=np.int64)
        for i in range(self.out_len):
            lo = (i * length) // self.out_len
            hi = ((i + 1) * length) // self.out_len
            chunk = x[:, :, lo:hi]
            idx = chunk.argmax(axis=2)
            out[:, :, i] = np.take_along_axis(chunk, idx[:, :, None], axis=2)[:, :, 0]
            argmax[:, :, i] = idx + lo
        self._argmax = argmax
        self._in_shape = x.shape
        return out

    def backward(self, dout: np.ndarray) -> np.ndarray:
        dx = np.zeros(self._in_shape)
        batch, channels, _ = self._in_shape
        b_idx = np.arange(batch)[:, None, None]
        c_idx = np.arange(channels)[None, :, None]
        np.add.at(dx, (b_idx, c_idx, self._argmax), dout)
        return dx
