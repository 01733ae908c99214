"""Metrics, splits, ablation driver and exploratory reports.

Micro-averaged precision, recall and F1 are the primary metrics; in
single-label multi-class classification all three coincide with accuracy,
and the test suite checks that identity exactly.  Macro averages are
reported alongside.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    ClassTooSmallError,
    ConfigError,
    EmptySplitError,
    LengthMismatchError,
    UnknownFeatureError,
)
from .model import VARIANT_LABELS, VARIANTS, ModelConfig, ModelNet
from .nn.rng import rng_for
from .training import DataBundle, TrainConfig, TrainResult, evaluate, train
from .validation import as_2d

# ---------------------------------------------------------------------------
# classification metrics


@dataclass
class MetricsReport:
    """Confusion matrix plus the derived aggregate metrics."""

    confusion: np.ndarray  # [K, K], rows true, columns predicted
    accuracy: float
    precision_micro: float
    recall_micro: float
    f1_micro: float
    precision_macro: float
    recall_macro: float
    f1_macro: float
    per_class: list[dict] = field(default_factory=list)
    n: int = 0

    def as_dict(self) -> dict:
        return {
            "n": self.n,
            "accuracy": self.accuracy,
            "precision_micro": self.precision_micro,
            "recall_micro": self.recall_micro,
            "f1_micro": self.f1_micro,
            "precision_macro": self.precision_macro,
            "recall_macro": self.recall_macro,
            "f1_macro": self.f1_macro,
            "per_class": self.per_class,
            "confusion": self.confusion.astype(int).tolist(),
        }


def _safe_div(num: float, den: float) -> float:
    return num / den if den > 0 else 0.0


def _f1_score(precision: float, recall: float) -> float:
    # The harmonic mean of two equal numbers is that number; taking the
    # shortcut keeps the micro identity f1 == precision == recall exact
    # instead of rounding through 2pr/(p+r).
    if precision == recall:
        return precision
    return _safe_div(2 * precision * recall, precision + recall)


def compute_metrics(y_true, y_pred, n_classes: int = 4) -> MetricsReport:
    """Multi-class metrics from predictions.

    Per-class precision, recall and F1 use the zero convention when a
    denominator is empty.  Micro averaging pools true/false positives over
    classes, which for single-label problems equals plain accuracy.
    """
    y_true = np.asarray(y_true, dtype=np.int64)
    y_pred = np.asarray(y_pred, dtype=np.int64)
    if y_true.shape != y_pred.shape or y_true.ndim != 1:
        raise LengthMismatchError(
            f"prediction shape {y_pred.shape} does not match truth {y_true.shape}"
        )
    n = int(y_true.size)
    confusion = np.zeros((n_classes, n_classes), dtype=np.int64)
    for t, p in zip(y_true, y_pred):
        confusion[t, p] += 1

    tp = np.diag(confusion).astype(np.float64)
    fp = confusion.sum(axis=0) - tp
    fn = confusion.sum(axis=1) - tp
    per_class = []
    precisions, recalls, f1s = [], [], []
    for c in range(n_classes):
        precision = _safe_div(tp[c], tp[c] + fp[c])
        recall = _safe_div(tp[c], tp[c] + fn[c])
        f1 = _f1_score(precision, recall)
        precisions.append(precision)
        recalls.append(recall)
        f1s.append(f1)
        per_class.append(
            {
                "label": c,
                "support": int(tp[c] + fn[c]),
                "precision": precision,
                "recall": recall,
                "f1": f1,
            }
        )
    micro_p = _safe_div(tp.sum(), tp.sum() + fp.sum())
    micro_r = _safe_div(tp.sum(), tp.sum() + fn.sum())
    micro_f1 = _f1_score(micro_p, micro_r)
    return MetricsReport(
        confusion=confusion,
        accuracy=_safe_div(tp.sum(), n),
        precision_micro=micro_p,
        recall_micro=micro_r,
        f1_micro=micro_f1,
        precision_macro=float(np.mean(precisions)),
        recall_macro=float(np.mean(recalls)),
        f1_macro=float(np.mean(f1s)),
        per_class=per_class,
        n=n,
    )


# ---------------------------------------------------------------------------
# stratified splitting


def _largest_remainder(count: int, ratios: tuple[float, ...]) -> list[int]:
    """Apportion ``count`` items to ratio buckets with the largest-remainder
    rule; allocations differ from the exact quota by less than one."""
    quotas = [count * r for r in ratios]
    base = [int(np.floor(q)) for q in quotas]
    leftover = count - sum(base)
    remainders = sorted(
        range(len(ratios)), key=lambda i: (-(quotas[i] - base[i]), i)
    )
    for i in remainders[:leftover]:
        base[i] += 1
    return base


def stratified_split(
    labels, ratios: tuple[float, ...] = (0.8, 0.1, 0.1), seed: int = 0
) -> tuple[np.ndarray, ...]:
    """Deterministic per-class split into ``len(ratios)`` index arrays.

    Each class is shuffled with its own labeled stream and apportioned by
    the largest-remainder rule, so every split's class count is within one
    of the exact quota.  Classes smaller than the number of splits raise
    :class:`ClassTooSmallError`.
    """
    ratios = tuple(float(r) for r in ratios)
    if any(r < 0 for r in ratios) or abs(sum(ratios) - 1.0) > 1e-9:
        raise ConfigError(f"split ratios must be non-negative and sum to 1, got {ratios}")
    labels = np.asarray(labels, dtype=np.int64)
    n_splits = len(ratios)
    buckets: list[list[int]] = [[] for _ in range(n_splits)]
    for label in np.unique(labels):
        idx = np.flatnonzero(labels == label)
        if len(idx) < n_splits:
            raise ClassTooSmallError(int(label), len(idx), n_splits)
        order = rng_for(seed, f"split-class-{int(label)}").permutation(len(idx))
        shuffled = idx[order]
        counts = _largest_remainder(len(idx), ratios)
        start = 0
        for split_i, count in enumerate(counts):
            buckets[split_i].extend(shuffled[start : start + count].tolist())
            start += count
    out = []
    for split_i, bucket in enumerate(buckets):
        if not bucket:
            raise EmptySplitError(f"#{split_i}")
        out.append(np.array(sorted(bucket), dtype=np.int64))
    return tuple(out)


# ---------------------------------------------------------------------------
# ablation driver


@dataclass
class AblationResult:
    variant: str
    label: str
    metrics: MetricsReport
    train_result: TrainResult


def run_ablation(
    base_config: ModelConfig,
    data: DataBundle,
    train_config: TrainConfig,
    ratios: tuple[float, float, float] = (0.8, 0.1, 0.1),
    variants: tuple[str, ...] = VARIANTS,
) -> list[AblationResult]:
    """Train every variant on identical splits and report test metrics."""
    train_idx, val_idx, test_idx = stratified_split(data.y, ratios, train_config.seed)
    results = []
    for variant in variants:
        config = base_config.with_variant(variant)
        net = ModelNet(config, seed=train_config.seed)
        outcome = train(
            net,
            data.subset(train_idx),
            data.subset(val_idx),
            train_config,
        )
        net.load_state(outcome.best_state)
        test = data.subset(test_idx)
        pred = net.predict(
            test.x_num if config.uses_numeric else None,
            test.x_emb if config.uses_semantic else None,
        )
        metrics = compute_metrics(test.y, pred, config.n_classes)
        results.append(
            AblationResult(
                variant=variant,
                label=VARIANT_LABELS[variant],
                metrics=metrics,
                train_result=outcome,
            )
        )
    return results


ABLATION_COLUMNS = ("Accuracy", "Precision", "Recall", "F1-Score")


def write_ablation_table(path: str, results: list[AblationResult], average: str = "micro") -> None:
    """Five-row, four-column ablation table as CSV."""
    suffix = "_micro" if average == "micro" else "_macro"
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["Model Configuration", *ABLATION_COLUMNS])
        for result in results:
            m = result.metrics
            writer.writerow(
                [
                    result.label,
                    f"{m.accuracy:.4f}",
                    f"{getattr(m, 'precision' + suffix):.4f}",
                    f"{getattr(m, 'recall' + suffix):.4f}",
                    f"{getattr(m, 'f1' + suffix):.4f}",
                ]
            )


# ---------------------------------------------------------------------------
# correlation matrix


def correlation_matrix(X: np.ndarray, names: tuple[str, ...] | None = None) -> np.ndarray:
    """Pearson correlation between feature columns.

    Constant columns get zero rows and columns (including the diagonal);
    other diagonal entries are exactly one and the matrix is exactly
    symmetric because the upper triangle is mirrored.
    """
    X = as_2d(X, "feature matrix")
    n, d = X.shape
    if names is not None and len(names) != d:
        raise LengthMismatchError(f"{len(names)} names for {d} columns")
    centered = X - X.mean(axis=0)
    norms = np.sqrt((centered**2).sum(axis=0))
    constant = norms == 0.0
    safe = np.where(constant, 1.0, norms)
    z = centered / safe
    corr = z.T @ z
    corr = np.triu(corr, k=1)
    corr = corr + corr.T
    np.fill_diagonal(corr, 1.0)
    corr[constant, :] = 0.0
    corr[:, constant] = 0.0
    return corr


def write_correlation_csv(path: str, corr: np.ndarray, names: tuple[str, ...]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["feature", *names])
        for name, row in zip(names, corr):
            writer.writerow([name, *[f"{v:.6f}" for v in row]])


# ---------------------------------------------------------------------------
# per-class distributions (hand-rolled Gaussian KDE)


@dataclass
class DensityCurve:
    feature: str
    label: int
    grid: np.ndarray
    density: np.ndarray
    bandwidth: float
    n: int


def silverman_bandwidth(values: np.ndarray) -> float:
    """Silverman's rule of thumb, ``0.9 * min(sd, IQR/1.34) * n^(-1/5)``.

    Returns 0.0 for degenerate inputs (fewer than two points or zero
    spread); callers substitute a fallback bandwidth.
    """
    x = np.asarray(values, dtype=np.float64)
    if x.size < 2:
        return 0.0
    sd = float(np.std(x, ddof=1))
    q75, q25 = np.percentile(x, [75, 25])
    iqr = float(q75 - q25)
    candidates = [c for c in (sd, iqr / 1.34) if c > 0]
    if not candidates:
        return 0.0
    return 0.9 * min(candidates) * x.size ** (-0.2)


def gaussian_kde(
    values: np.ndarray, grid: np.ndarray, bandwidth: float
) -> np.ndarray:
    """Evaluate a Gaussian kernel density estimate on a grid."""
    x = np.asarray(values, dtype=np.float64)
    diffs = (grid[:, None] - x[None, :]) / bandwidth
    kernel = np.exp(-0.5 * diffs**2) / np.sqrt(2.0 * np.pi)
    return kernel.sum(axis=1) / (x.size * bandwidth)


def distribution_report(
    X: np.ndarray,
    names: tuple[str, ...],
    labels,
    subset: tuple[str, ...],
    grid_points: int = 200,
) -> list[DensityCurve]:
    """Per-class density curves for the named features.

    All classes of one feature share a grid spanning the observed range
    extended by three times the largest bandwidth, so each curve's
    trapezoid integral is within a couple of percent of one.  Degenerate
    groups (a single point or zero spread) fall back to one tenth of the
    feature's overall range, with a warning.
    """
    X = as_2d(X, "feature matrix")
    labels = np.asarray(labels, dtype=np.int64)
    if len(labels) != X.shape[0]:
        raise LengthMismatchError(
            f"{len(labels)} labels for {X.shape[0]} feature rows"
        )
    name_to_col = {name: i for i, name in enumerate(names)}
    curves: list[DensityCurve] = []
    for feature in subset:
        if feature not in name_to_col:
            raise UnknownFeatureError(feature)
        column = X[:, name_to_col[feature]]
        feature_range = float(np.max(column) - np.min(column))
        groups = []
        for label in np.unique(labels):
            values = column[labels == label]
            bandwidth = silverman_bandwidth(values)
            if bandwidth == 0.0:
                bandwidth = 0.1 * feature_range if feature_range > 0 else 0.1
                warnings.warn(
                    f"degenerate bandwidth for feature {feature!r} class {int(label)}; "
                    f"falling back to {bandwidth:.6g}",
                    stacklevel=2,
                )
            groups.append((int(label), values, bandwidth))
        pad = 3.0 * max(bandwidth for _, _, bandwidth in groups)
        lo = float(np.min(column)) - pad
        hi = float(np.max(column)) + pad
        grid = np.linspace(lo, hi, grid_points)
        for label, values, bandwidth in groups:
            curves.append(
                DensityCurve(
                    feature=feature,
                    label=label,
                    grid=grid,
                    density=gaussian_kde(values, grid, bandwidth),
                    bandwidth=bandwidth,
                    n=int(values.size),
                )
            )
    return curves


def write_distribution_csv(path: str, curves: list[DensityCurve]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["feature", "label", "bandwidth", "n", "grid", "density"])
        for curve in curves:
            for g, d in zip(curve.grid, curve.density):
                writer.writerow(
                    [curve.feature, curve.label, f"{curve.bandwidth:.8g}", curve.n,
                     f"{g:.8g}", f"{d:.8g}"]
                )
