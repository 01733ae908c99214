"""Mini-batch training loop with early stopping on validation accuracy.

The loop is fully deterministic for a given seed: weight initialization,
batch shuffling and dropout masks each draw from their own labeled Philox
stream, so two runs with identical inputs produce identical epoch-loss
traces.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    ConfigError,
    EmptyTrainingSetError,
    LengthMismatchError,
    NonfiniteLossError,
)
from .model import ModelConfig, ModelNet
from .nn.losses import cross_entropy
from .nn.optim import AdamW
from .nn.rng import rng_for
from .validation import check_labels


@dataclass
class Sample:
    """One training example: numeric features, text embedding, class."""

    numeric: np.ndarray
    embedding: np.ndarray | None
    label: int
    segment_id: str = ""


@dataclass
class DataBundle:
    """Aligned arrays for a set of samples."""

    x_num: np.ndarray | None
    x_emb: np.ndarray | None
    y: np.ndarray
    ids: list[str] = field(default_factory=list)

    def __post_init__(self) -> None:
        n = len(self.y)
        if self.x_num is not None and len(self.x_num) != n:
            raise LengthMismatchError(
                f"numeric matrix has {len(self.x_num)} rows, labels have {n}"
            )
        if self.x_emb is not None and len(self.x_emb) != n:
            raise LengthMismatchError(
                f"embedding matrix has {len(self.x_emb)} rows, labels have {n}"
            )

    def __len__(self) -> int:
        return int(len(self.y))

    @classmethod
    def from_samples(cls, samples: list[Sample]) -> "DataBundle":
        if not samples:
            raise EmptyTrainingSetError()
        x_num = np.stack([s.numeric for s in samples])
        has_emb = samples[0].embedding is not None
        x_emb = np.stack([s.embedding for s in samples]) if has_emb else None
        y = np.array([s.label for s in samples], dtype=np.int64)
        return cls(x_num=x_num, x_emb=x_emb, y=y, ids=[s.segment_id for s in samples])

    def subset(self, idx: np.ndarray) -> "DataBundle":
        return DataBundle(
            x_num=None if self.x_num is None else self.x_num[idx],
            x_emb=None if self.x_emb is None else self.x_emb[idx],
            y=self.y[idx],
            ids=[self.ids[i] for i in idx] if self.ids else [],
        )


@dataclass
class TrainConfig:
    learning_rate: float = 2e-5
    batch_size: int = 64
    epochs: int = 100
    patience: int = 20
    weight_decay: float = 0.01
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 0

    def validate(self) -> None:
        if self.learning_rate <= 0:
            raise ConfigError("learning_rate must be positive")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be positive")
        if self.epochs < 1:
            raise ConfigError("epochs must be positive")
        if self.patience < 1:
            raise ConfigError("patience must be positive")


@dataclass
class TrainResult:
    """Best-validation weights plus the full per-epoch history."""

    best_state: dict[str, np.ndarray]
    best_epoch: int
    best_val_accuracy: float
    history: list[dict]
    stopped_early: bool
    model_config: ModelConfig
    seed: int

    @property
    def epoch_losses(self) -> list[float]:
        return [record["train_loss"] for record in self.history]


def _accuracy_and_loss(net: ModelNet, bundle: DataBundle, batch_size: int) -> tuple[float, float]:
    """Eval-mode accuracy and mean cross-entropy over a bundle."""
    n = len(bundle)
    if n == 0:
        return 0.0, 0.0
    correct = 0
    loss_sum = 0.0
    for start in range(0, n, batch_size):
        idx = np.arange(start, min(start + batch_size, n))
        part = bundle.subset(idx)
        logits = net.forward(part.x_num, part.x_emb, train=False)
        loss, _ = cross_entropy(logits, part.y)
        loss_sum += loss * len(idx)
        correct += int(np.sum(np.argmax(logits, axis=1) == part.y))
    return correct / n, loss_sum / n


def evaluate(net: ModelNet, bundle: DataBundle, batch_size: int = 256) -> dict:
    accuracy, loss = _accuracy_and_loss(net, bundle, batch_size)
    return {"accuracy": accuracy, "loss": loss, "n": len(bundle)}


def train(
    net: ModelNet,
    train_data: DataBundle,
    val_data: DataBundle | None,
    config: TrainConfig,
    log_path: str | None = None,
) -> TrainResult:
    """Train ``net`` in place and return the best-validation snapshot.

    Validation accuracy drives early stopping: training halts after
    ``patience`` epochs without strict improvement.  Without validation
    data the loop runs all epochs and the final weights are the result.
    """
    config.validate()
    if len(train_data) == 0:
        raise EmptyTrainingSetError()
    check_labels(train_data.y, net.config.n_classes)
    if val_data is not None and len(val_data):
        check_labels(val_data.y, net.config.n_classes)
    else:
        val_data = None

    optimizer = AdamW(
        net.parameter_layers(),
        lr=config.learning_rate,
        betas=(config.beta1, config.beta2),
        eps=config.eps,
        weight_decay=config.weight_decay,
    )
    shuffle_rng = rng_for(config.seed, "shuffle")
    dropout_rng = rng_for(config.seed, "dropout")

    n = len(train_data)
    best_state = net.copy_state()
    best_epoch = 0
    best_val_acc = -1.0
    since_best = 0
    history: list[dict] = []
    stopped_early = False
    log_fh = open(log_path, "w") if log_path else None
    try:
        for epoch in range(1, config.epochs + 1):
            order = shuffle_rng.permutation(n)
            loss_sum = 0.0
            for batch_no, start in enumerate(range(0, n, config.batch_size)):
                idx = order[start : start + config.batch_size]
                batch = train_data.subset(idx)
                logits = net.forward(
                    batch.x_num, batch.x_emb, train=True, dropout_rng=dropout_rng
                )
                loss, dlogits = cross_entropy(logits, batch.y)
                if not np.isfinite(loss):
                    raise NonfiniteLossError(epoch, batch_no)
                loss_sum += loss * len(idx)
                net.backward(dlogits)
                optimizer.step()
            record = {"epoch": epoch, "train_loss": loss_sum / n}
            if val_data is not None:
                val_acc, val_loss = _accuracy_and_loss(net, val_data, config.batch_size)
                record["val_loss"] = val_loss
                record["val_accuracy"] = val_acc
                if val_acc > best_val_acc:
                    best_val_acc = val_acc
                    best_epoch = epoch
                    best_state = net.copy_state()
                    since_best = 0
                else:
                    since_best += 1
            history.append(record)
            if log_fh:
                log_fh.write(json.dumps(record) + "\n")
                log_fh.flush()
            if val_data is not None and since_best >= config.patience:
                stopped_early = True
                break
        if val_data is None:
            best_state = net.copy_state()
            best_epoch = len(history)
            best_val_acc = float("nan")
    finally:
        if log_fh:
            log_fh.close()
    return TrainResult(
        best_state=best_state,
        best_epoch=best_epoch,
        best_val_accuracy=best_val_acc,
        history=history,
        stopped_early=stopped_early,
        model_config=net.config,
        seed=config.seed,
    )
