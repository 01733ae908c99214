"""Dual-channel fusion network for driving-style classification.

The semantic channel projects a 768-d text embedding to a 128-d code.
The numeric channel runs the feature vector through parallel multi-scale
convolutions, scaled dot-product attention over positions, two
convolution + batch-norm + ReLU refinement stages, adaptive max pooling
and a linear map to its own 128-d code.  The two codes are concatenated
and classified by a two-layer head.

Ablation variants reuse the same assembly with pieces removed: attention
skipped, the convolution bank collapsed to one kernel, or either channel
severed entirely.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, ShapeMismatchError, UnknownVariantError
from .nn.layers import (
    AdaptiveMaxPool1d,
    BatchNorm1d,
    Conv1d,
    Dense,
    Dropout,
    ReLU,
    SelfAttention,
)
from .nn.losses import softmax
from .nn.rng import rng_for

VARIANTS = ("full", "no_attention", "no_multiscale", "text_only", "numeric_only")

# Human-readable row labels for the ablation table.
VARIANT_LABELS = {
    "full": "Full Model",
    "no_attention": "w/o Spatio-Temp Attn.",
    "no_multiscale": "w/o Multi-Scale Conv.",
    "text_only": "Text Features Only",
    "numeric_only": "Num. Features Only",
}

INPUT_MODES = ("feature_vector", "raw_series")


@dataclass
class ModelConfig:
    """Architecture hyperparameters; every field participates in the
    fingerprint, so two configs with equal fields are interchangeable."""

    variant: str = "full"
    input_mode: str = "feature_vector"
    numeric_dim: int = 36  # feature dimension, or series length in raw mode
    n_classes: int = 4
    embed_dim: int = 768
    proj_dim: int = 128
    conv_kernels: tuple[int, ...] = (3, 5, 7)
    branch_channels: int = 64
    d_k: int = 64
    refine_channels: tuple[int, ...] = (128, 128)
    refine_kernel: int = 3
    pool_out_len: int = 1
    fusion_hidden: int = 256
    dropout: float = 0.3
    dtype: str = "float64"

    def __post_init__(self) -> None:
        self.conv_kernels = tuple(int(k) for k in self.conv_kernels)
        self.refine_channels = tuple(int(c) for c in self.refine_channels)

    # -- derived structure ------------------------------------------------

    @property
    def uses_semantic(self) -> bool:
        return self.variant != "numeric_only"

    @property
    def uses_numeric(self) -> bool:
        return self.variant != "text_only"

    @property
    def uses_attention(self) -> bool:
        return self.uses_numeric and self.variant != "no_attention"

    @property
    def multiscale(self) -> bool:
        return self.variant != "no_multiscale"

    @property
    def in_channels(self) -> int:
        return 1 if self.input_mode == "feature_vector" else 3

    @property
    def concat_channels(self) -> int:
        # the single-branch variant keeps the bank's total width
        return self.branch_channels * len(self.conv_kernels)

    @property
    def refine_in(self) -> int:
        return self.d_k if self.uses_attention else self.concat_channels

    @property
    def fused_dim(self) -> int:
        return self.proj_dim * (int(self.uses_semantic) + int(self.uses_numeric))

    def validate(self) -> None:
        if self.variant not in VARIANTS:
            raise UnknownVariantError(self.variant, VARIANTS)
        if self.input_mode not in INPUT_MODES:
            raise ConfigError(f"unknown input mode {self.input_mode!r}")
        for name in (
            "numeric_dim",
            "n_classes",
            "embed_dim",
            "proj_dim",
            "branch_channels",
            "d_k",
            "refine_kernel",
            "pool_out_len",
            "fusion_hidden",
        ):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be positive")
        if not self.conv_kernels:
            raise ConfigError("conv_kernels must not be empty")
        for k in (*self.conv_kernels, self.refine_kernel):
            if k % 2 == 0 or k < 1:
                raise ConfigError(f"convolution kernels must be odd, got {k}")
        if not self.refine_channels:
            raise ConfigError("refine_channels must not be empty")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError(f"dropout must lie in [0, 1), got {self.dropout}")
        if self.pool_out_len > self.numeric_dim:
            raise ConfigError(
                f"pool_out_len {self.pool_out_len} exceeds sequence length "
                f"{self.numeric_dim}"
            )
        if self.dtype not in ("float64", "float32"):
            raise ConfigError(f"dtype must be float64 or float32, got {self.dtype}")

    # -- serialization ----------------------------------------------------

    def as_dict(self) -> dict:
        return {
            "variant": self.variant,
            "input_mode": self.input_mode,
            "numeric_dim": self.numeric_dim,
            "n_classes": self.n_classes,
            "embed_dim": self.embed_dim,
            "proj_dim": self.proj_dim,
            "conv_kernels": list(self.conv_kernels),
            "branch_channels": self.branch_channels,
            "d_k": self.d_k,
            "refine_channels": list(self.refine_channels),
            "refine_kernel": self.refine_kernel,
            "pool_out_len": self.pool_out_len,
            "fusion_hidden": self.fusion_hidden,
            "dropout": self.dropout,
            "dtype": self.dtype,
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "ModelConfig":
        known = set(cls.__dataclass_fields__)
        unknown = set(payload) - known
        if unknown:
            raise ConfigError(f"unknown model config keys: {sorted(unknown)}")
        config = cls(**payload)
        config.validate()
        return config

    def fingerprint(self) -> str:
        """Hex SHA-256 of the canonical JSON form."""
        canonical = json.dumps(self.as_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()

    def with_variant(self, variant: str) -> "ModelConfig":
        if variant not in VARIANTS:
            raise UnknownVariantError(variant, VARIANTS)
        payload = self.as_dict()
        payload["variant"] = variant
        return ModelConfig.from_dict(payload)


def param_count(config: ModelConfig) -> int:
    """Closed-form trainable parameter count for a config.

    Batch-norm running statistics are buffers, not parameters, and are
    excluded.
    """
    config.validate()
    total = 0
    if config.uses_semantic:
        total += config.proj_dim * config.embed_dim + config.proj_dim
    if config.uses_numeric:
        if config.multiscale:
            for k in config.conv_kernels:
                total += config.branch_channels * config.in_channels * k
                total += config.branch_channels
        else:
            total += config.concat_channels * config.in_channels * 3
            total += config.concat_channels
        if config.uses_attention:
            total += 3 * config.d_k * config.concat_channels
        prev = config.refine_in
        for channels in config.refine_channels:
            total += channels * prev * config.refine_kernel + channels
            total += 2 * channels  # gamma and beta
            prev = channels
        total += config.proj_dim * (prev * config.pool_out_len) + config.proj_dim
    total += config.fusion_hidden * config.fused_dim + config.fusion_hidden
    total += config.n_classes * config.fusion_hidden + config.n_classes
    return total


class ModelNet:
    """A concrete network built from a :class:`ModelConfig`.

    Weight initialization draws from a single labeled Philox stream in a
    fixed layer order, so ``ModelNet(config, seed)`` is fully
    deterministic.
    """

    def __init__(self, config: ModelConfig, seed: int = 0):
        config.validate()
        self.config = config
        self.seed = seed
        dtype = np.float64 if config.dtype == "float64" else np.float32
        rng = rng_for(seed, "init")

        self.semantic_proj = None
        self.branches: list[Conv1d] = []
        self.attention = None
        self.refine: list[tuple[Conv1d, BatchNorm1d, ReLU]] = []
        self.pool = None
        self.numeric_fc = None

        if config.uses_semantic:
            self.semantic_proj = Dense(
                "semantic_proj", config.embed_dim, config.proj_dim, rng, dtype
            )
            self.semantic_relu = ReLU("semantic_relu")
            self.semantic_dropout = Dropout("semantic_dropout", config.dropout)
        if config.uses_numeric:
            if config.multiscale:
                for k in config.conv_kernels:
                    self.branches.append(
                        Conv1d(
                            f"branch_k{k}",
                            config.in_channels,
                            config.branch_channels,
                            k,
                            rng,
                            dtype,
                        )
                    )
            else:
                self.branches.append(
                    Conv1d(
                        "branch_single",
                        config.in_channels,
                        config.concat_channels,
                        3,
                        rng,
                        dtype,
                    )
                )
            if config.uses_attention:
                self.attention = SelfAttention(
                    "attention", config.concat_channels, config.d_k, rng, dtype
                )
            prev = config.refine_in
            for i, channels in enumerate(config.refine_channels, start=1):
                conv = Conv1d(
                    f"refine{i}_conv", prev, channels, config.refine_kernel, rng, dtype
                )
                bn = BatchNorm1d(f"refine{i}_bn", channels, dtype=dtype)
                self.refine.append((conv, bn, ReLU(f"refine{i}_relu")))
                prev = channels
            self.pool = AdaptiveMaxPool1d("pool", config.pool_out_len)
            self.numeric_fc = Dense(
                "numeric_fc", prev * config.pool_out_len, config.proj_dim, rng, dtype
            )
        self.fusion_hidden = Dense(
            "fusion_hidden", config.fused_dim, config.fusion_hidden, rng, dtype
        )
        self.fusion_relu = ReLU("fusion_relu")
        self.fusion_out = Dense("fusion_out", config.fusion_hidden, config.n_classes, rng, dtype)

    # -- bookkeeping ------------------------------------------------------

    def parameter_layers(self) -> list:
        """Layers holding trainable parameters, in forward order."""
        layers = []
        if self.semantic_proj is not None:
            layers.append(self.semantic_proj)
        layers.extend(self.branches)
        if self.attention is not None:
            layers.append(self.attention)
        for conv, bn, _ in self.refine:
            layers.extend((conv, bn))
        if self.numeric_fc is not None:
            layers.append(self.numeric_fc)
        layers.extend((self.fusion_hidden, self.fusion_out))
        return layers

    @property
    def param_count(self) -> int:
        return sum(layer.param_count for layer in self.parameter_layers())

    def state(self) -> dict[str, np.ndarray]:
        out: dict[str, np.ndarray] = {}
        for layer in self.parameter_layers():
            out.update(layer.state())
        return out

    def copy_state(self) -> dict[str, np.ndarray]:
        return {k: v.copy() for k, v in self.state().items()}

    def load_state(self, state: dict[str, np.ndarray]) -> None:
        for layer in self.parameter_layers():
            layer.load_state(state)

    # -- forward / backward ----------------------------------------------

    def _numeric_3d(self, x_num: np.ndarray) -> np.ndarray:
        x = np.asarray(x_num, dtype=np.float64)
        if self.config.input_mode == "feature_vector":
            if x.ndim != 2 or x.shape[1] != self.config.numeric_dim:
                raise ShapeMismatchError(
                    f"numeric input must be [batch, {self.config.numeric_dim}], "
                    f"got {x.shape}"
                )
            return x[:, None, :]
        if x.ndim != 3 or x.shape[1] != 3 or x.shape[2] != self.config.numeric_dim:
            raise ShapeMismatchError(
                f"numeric input must be [batch, 3, {self.config.numeric_dim}], "
                f"got {x.shape}"
            )
        return x

    def forward(
        self,
        x_num: np.ndarray | None,
        x_emb: np.ndarray | None,
        train: bool = False,
        dropout_rng=None,
    ) -> np.ndarray:
        """Compute class logits.  ``x_num`` may be None for the text-only
        variant, ``x_emb`` for the numeric-only variant."""
        cfg = self.config
        parts = []
        if cfg.uses_semantic:
            if x_emb is None:
                raise ShapeMismatchError(f"variant {cfg.variant} needs an embedding input")
            x_emb = np.asarray(x_emb, dtype=np.float64)
            if x_emb.ndim != 2 or x_emb.shape[1] != cfg.embed_dim:
                raise ShapeMismatchError(
                    f"embedding input must be [batch, {cfg.embed_dim}], got {x_emb.shape}"
                )
            e = self.semantic_proj.forward(x_emb, train)
            e = self.semantic_relu.forward(e, train)
            e = self.semantic_dropout.forward(e, train, rng=dropout_rng)
            parts.append(e)
        if cfg.uses_numeric:
            if x_num is None:
                raise ShapeMismatchError(f"variant {cfg.variant} needs a numeric input")
            x3 = self._numeric_3d(x_num)
            c = np.concatenate([conv.forward(x3, train) for conv in self.branches], axis=1)
            if self.attention is not None:
                a = self.attention.forward(np.transpose(c, (0, 2, 1)), train)
                c = np.transpose(a, (0, 2, 1))
            for conv, bn, relu in self.refine:
                c = relu.forward(bn.forward(conv.forward(c, train), train), train)
            p = self.pool.forward(c, train)
            self._pool_out_shape = p.shape
            flat = p.reshape(p.shape[0], -1)
            f = self.numeric_fc.forward(flat, train)
            parts.append(f)
        fused = parts[0] if len(parts) == 1 else np.concatenate(parts, axis=1)
        h = self.fusion_relu.forward(self.fusion_hidden.forward(fused, train), train)
        return self.fusion_out.forward(h, train)

    def backward(self, dlogits: np.ndarray):
        """Backpropagate; returns ``(d_numeric, d_embedding)`` with None
        for absent channels."""
        cfg = self.config
        dh = self.fusion_out.backward(dlogits)
        dfused = self.fusion_hidden.backward(self.fusion_relu.backward(dh))
        d_emb = None
        d_num = None
        offset = 0
        if cfg.uses_semantic:
            de = dfused[:, : cfg.proj_dim]
            offset = cfg.proj_dim
            de = self.semantic_dropout.backward(de)
            de = self.semantic_relu.backward(de)
            d_emb = self.semantic_proj.backward(de)
        if cfg.uses_numeric:
            df = dfused[:, offset : offset + cfg.proj_dim]
            dflat = self.numeric_fc.backward(df)
            dp = dflat.reshape(self._pool_out_shape)
            dc = self.pool.backward(dp)
            for conv, bn, relu in reversed(self.refine):
                dc = conv.backward(bn.backward(relu.backward(dc)))
            if self.attention is not None:
                da = self.attention.backward(np.transpose(dc, (0, 2, 1)))
                dc = np.transpose(da, (0, 2, 1))
            d_num3 = None
            start = 0
            for conv in self.branches:
                width = conv.out_channels
                contribution = conv.backward(dc[:, start : start + width, :])
                d_num3 = contribution if d_num3 is None else d_num3 + contribution
                start += width
            d_num = (
                d_num3[:, 0, :] if cfg.input_mode == "feature_vector" else d_num3
            )
        return d_num, d_emb

    def predict_proba(self, x_num, x_emb) -> np.ndarray:
        return softmax(self.forward(x_num, x_emb, train=False), axis=1)

    def predict(self, x_num, x_emb) -> np.ndarray:
        """Argmax class per row; ties resolve to the lowest class index."""
        return np.argmax(self.forward(x_num, x_emb, train=False), axis=1)


def sever_to_text_only(net: ModelNet) -> ModelNet:
    """Build a text-only net that reproduces the full net with its numeric
    code forced to zero, by copying the shared weights.

    The fusion hidden layer of the text-only net receives exactly the
    columns of the full net's hidden layer that touch the semantic code.
    """
    cfg = net.config
    if not (cfg.uses_semantic and cfg.uses_numeric):
        raise ConfigError("sever_to_text_only needs a dual-channel source net")
    text_net = ModelNet(cfg.with_variant("text_only"), seed=net.seed)
    text_net.semantic_proj.params["W"][...] = net.semantic_proj.params["W"]
    text_net.semantic_proj.params["b"][...] = net.semantic_proj.params["b"]
    text_net.fusion_hidden.params["W"][...] = net.fusion_hidden.params["W"][
        :, : cfg.proj_dim
    ]
    text_net.fusion_hidden.params["b"][...] = net.fusion_hidden.params["b"]
    text_net.fusion_out.params["W"][...] = net.fusion_out.params["W"]
    text_net.fusion_out.params["b"][...] = net.fusion_out.params["b"]
    return text_net
