"""Scikit-learn style classifier facade over the fusion network.

``X`` carries the numeric feature block and the text embedding side by
side: ``[n, numeric_dim + 768]`` with numeric columns first.  The
text-only variant also accepts a bare ``[n, 768]`` matrix and the
numeric-only variant a bare ``[n, numeric_dim]`` matrix.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin

from .checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from .errors import FingerprintMismatchError, ShapeMismatchError
from .evaluation import stratified_split
from .features import NormStats
from .model import ModelConfig, ModelNet
from .training import DataBundle, TrainConfig, train
from .validation import as_2d, check_labels

EMBED_DIM = 768


class DrivingStyleClassifier(ClassifierMixin, BaseEstimator):
    """Dual-channel driving-style classifier with fit/predict semantics.

    A held-out validation fraction drives early stopping; the fitted model
    is the best-validation snapshot.  The numeric block is z-score
    normalized with statistics fitted on the training portion only.
    """

    def __init__(
        self,
        variant: str = "full",
        numeric_dim: int = 36,
        embed_dim: int = EMBED_DIM,
        learning_rate: float = 2e-5,
        batch_size: int = 64,
        epochs: int = 100,
        patience: int = 20,
        dropout: float = 0.3,
        weight_decay: float = 0.01,
        validation_fraction: float = 0.1,
        normalize: bool = True,
        seed: int = 0,
    ):
        self.variant = variant
        self.numeric_dim = numeric_dim
        self.embed_dim = embed_dim
        self.learning_rate = learning_rate
        self.batch_size = batch_size
        self.epochs = epochs
        self.patience = patience
        self.dropout = dropout
        self.weight_decay = weight_decay
        self.validation_fraction = validation_fraction
        self.normalize = normalize
        self.seed = seed

    # -- plumbing ---------------------------------------------------------

    def _model_config(self) -> ModelConfig:
        config = ModelConfig(
            variant=self.variant,
            numeric_dim=self.numeric_dim,
            embed_dim=self.embed_dim,
            dropout=self.dropout,
        )
        config.validate()
        return config

    def _split_columns(self, X: np.ndarray, config: ModelConfig):
        """Slice ``X`` into (numeric, embedding) blocks for the variant."""
        X = as_2d(X, "X")
        full_width = self.numeric_dim + self.embed_dim
        if config.variant == "text_only" and X.shape[1] == self.embed_dim:
            return None, X
        if config.variant == "numeric_only" and X.shape[1] == self.numeric_dim:
            return X, None
        if X.shape[1] != full_width:
            raise ShapeMismatchError(
                f"X has {X.shape[1]} columns, expected {full_width} "
                f"(numeric {self.numeric_dim} + embedding {self.embed_dim})"
            )
        x_num = X[:, : self.numeric_dim] if config.uses_numeric else None
        x_emb = X[:, self.numeric_dim :] if config.uses_semantic else None
        return x_num, x_emb

    # -- estimator API ----------------------------------------------------

    def fit(self, X, y):
        config = self._model_config()
        x_num, x_emb = self._split_columns(X, config)
        y = check_labels(y, config.n_classes)

        n = len(y)
        if self.validation_fraction > 0:
            train_idx, val_idx = stratified_split(
                y, (1.0 - self.validation_fraction, self.validation_fraction), self.seed
            )
        else:
            train_idx = np.arange(n)
            val_idx = np.array([], dtype=np.int64)

        self.norm_stats_ = None
        if x_num is not None and self.normalize:
            names = tuple(f"f{i}" for i in range(self.numeric_dim))
            self.norm_stats_ = NormStats.fit(x_num[train_idx], names)
            x_num = self.norm_stats_.apply(x_num)

        bundle = DataBundle(x_num=x_num, x_emb=x_emb, y=y)
        self.net_ = ModelNet(config, seed=self.seed)
        train_config = TrainConfig(
            learning_rate=self.learning_rate,
            batch_size=self.batch_size,
            epochs=self.epochs,
            patience=self.patience,
            weight_decay=self.weight_decay,
            seed=self.seed,
        )
        self.train_result_ = train(
            self.net_,
            bundle.subset(train_idx),
            bundle.subset(val_idx) if len(val_idx) else None,
            train_config,
        )
        self.net_.load_state(self.train_result_.best_state)
        self.classes_ = np.arange(config.n_classes)
        self.n_features_in_ = as_2d(X, "X").shape[1]
        return self

    def _prepared(self, X):
        if not hasattr(self, "net_"):
            raise ShapeMismatchError("classifier is not fitted")
        x_num, x_emb = self._split_columns(X, self.net_.config)
        if x_num is not None and self.norm_stats_ is not None:
            x_num = self.norm_stats_.apply(x_num)
        return x_num, x_emb

    def predict_proba(self, X) -> np.ndarray:
        x_num, x_emb = self._prepared(X)
        return self.net_.predict_proba(x_num, x_emb)

    def predict(self, X) -> np.ndarray:
        x_num, x_emb = self._prepared(X)
        return self.net_.predict(x_num, x_emb)

    # -- persistence ------------------------------------------------------

    def save(self, path: str) -> None:
        """Serialize the fitted network, config and normalization stats."""
        if not hasattr(self, "net_"):
            raise ShapeMismatchError("classifier is not fitted")
        save_checkpoint(
            path,
            Checkpoint(
                config=self.net_.config,
                state=self.net_.state(),
                norm_stats=self.norm_stats_,
                meta={"seed": self.seed, "estimator": "DrivingStyleClassifier"},
            ),
        )

    @classmethod
    def load(cls, path: str) -> "DrivingStyleClassifier":
        checkpoint = load_checkpoint(path)
        config = checkpoint.config
        est = cls(
            variant=config.variant,
            numeric_dim=config.numeric_dim,
            embed_dim=config.embed_dim,
            dropout=config.dropout,
            seed=int(checkpoint.meta.get("seed", 0)),
        )
        if config.fingerprint() != est._model_config().fingerprint():
            raise FingerprintMismatchError(
                config.fingerprint(), est._model_config().fingerprint()
            )
        est.net_ = checkpoint.build_net(seed=est.seed)
        est.norm_stats_ = checkpoint.norm_stats
        est.classes_ = np.arange(config.n_classes)
        est.n_features_in_ = (
            config.numeric_dim * int(config.uses_numeric)
            + config.embed_dim * int(config.uses_semantic)
        )
        return est
