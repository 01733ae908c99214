"""Three-tier kinematic feature extraction.

Tier one: nine order statistics per signal.  Tier two: five behavioral
rates and counts computed from speed, acceleration and jerk.  Tier three:
four dynamic coupling measures (cross-correlations and lag-1
autocorrelations).  With ``n`` signals the feature vector has dimension
``9*n + 5 + 4``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .errors import ConfigError, LengthMismatchError, MissingColumnError
from .ingest import StyleLabel, TrajectorySegment
from .validation import as_1d, as_2d, check_same_length

STAT_NAMES = (
    "mean",
    "std",
    "max",
    "min",
    "median",
    "q25",
    "q75",
    "kurtosis",
    "skewness",
)
BEHAVIOR_NAMES = (
    "acceleration_change_rate",
    "num_hard_accelerations",
    "num_hard_brakes",
    "num_hard_turns",
    "speed_change_rate",
)
DYNAMIC_NAMES = (
    "speed_acceleration_cross_correlation",
    "acceleration_jerk_cross_correlation",
    "speed_autocorrelation",
    "acceleration_autocorrelation",
)

N_STAT = len(STAT_NAMES)
N_BEHAVIOR = len(BEHAVIOR_NAMES)
N_DYNAMIC = len(DYNAMIC_NAMES)

DEFAULT_TAU = 2.0
DEFAULT_SIGNALS = ("speed", "acceleration", "jerk")

BASE_SIGNALS = ("speed", "acceleration", "jerk")

# Ready-made wider signal rosters; dimension is 9*len + 9.
EXTENDED_SIGNALS_10 = (
    "speed",
    "acceleration",
    "jerk",
    "abs:acceleration",
    "abs:jerk",
    "diff:speed",
    "rollmean5:speed",
    "rollstd5:speed",
    "rollmean5:acceleration",
    "rollstd5:acceleration",
)
EXTENDED_SIGNALS_36 = BASE_SIGNALS + tuple(
    f"{op}:{base}" for op in ("abs", "pos", "neg", "diff") for base in BASE_SIGNALS
) + tuple(
    f"{op}{window}:{base}"
    for op in ("rollmean", "rollstd", "rollmax")
    for window in (5, 25)
    for base in BASE_SIGNALS
) + tuple(f"abs:diff:{base}" for base in BASE_SIGNALS)


def feature_dimension(n_signals: int) -> int:
    """Total feature count for ``n_signals`` statistical signals."""
    return N_STAT * n_signals + N_BEHAVIOR + N_DYNAMIC


# ---------------------------------------------------------------------------
# tier 1: order statistics


def stat_features(series: np.ndarray) -> np.ndarray:
    """Nine order statistics of one signal, in :data:`STAT_NAMES` order.

    Standard deviation uses the population convention (ddof 0), quartiles
    use linear interpolation, kurtosis is excess kurtosis ``m4/m2^2 - 3``
    and skewness is ``m3/m2^1.5``.  A constant series reports zero for
    both shape statistics.
    """
    x = as_1d(series, "series")
    mean = float(np.mean(x))
    centered = x - mean
    m2 = float(np.mean(centered**2))
    if m2 > 0.0:
        m3 = float(np.mean(centered**3))
        m4 = float(np.mean(centered**4))
        kurtosis = m4 / (m2 * m2) - 3.0
        skewness = m3 / m2**1.5
    else:
        kurtosis = 0.0
        skewness = 0.0
    return np.array(
        [
            mean,
            float(np.sqrt(m2)),
            float(np.max(x)),
            float(np.min(x)),
            float(np.percentile(x, 50)),
            float(np.percentile(x, 25)),
            float(np.percentile(x, 75)),
            kurtosis,
            skewness,
        ]
    )


# ---------------------------------------------------------------------------
# tier 2: behavioral rates and counts


def mean_abs_change(series: np.ndarray) -> float:
    """Mean absolute sample-to-sample change, ``1/(T-1) * sum |x_t - x_{t-1}|``."""
    x = as_1d(series, "series", min_length=2)
    return float(np.mean(np.abs(np.diff(x))))


def behavior_features(
    speed: np.ndarray,
    accel: np.ndarray,
    jerk: np.ndarray,
    tau: float = DEFAULT_TAU,
) -> np.ndarray:
    """Five behavioral features in :data:`BEHAVIOR_NAMES` order.

    Hard-event counts use strict inequalities against the shared threshold
    ``tau``: accelerations above ``tau``, brakes below ``-tau`` and turns
    where absolute jerk exceeds ``tau``.
    """
    if tau < 0:
        raise ConfigError(f"threshold tau must be non-negative, got {tau}")
    v = as_1d(speed, "speed", min_length=2)
    a = as_1d(accel, "accel", min_length=2)
    j = as_1d(jerk, "jerk", min_length=2)
    check_same_length("speed", v, "accel", a)
    check_same_length("accel", a, "jerk", j)
    return np.array(
        [
            mean_abs_change(a),
            float(np.count_nonzero(a > tau)),
            float(np.count_nonzero(a < -tau)),
            float(np.count_nonzero(np.abs(j) > tau)),
            mean_abs_change(v),
        ]
    )


# ---------------------------------------------------------------------------
# tier 3: dynamic coupling


def pearson(x: np.ndarray, y: np.ndarray) -> float:
    """Pearson correlation; either input having zero variance gives 0.0."""
    x = as_1d(x, "x", min_length=2)
    y = as_1d(y, "y", min_length=2)
    check_same_length("x", x, "y", y)
    dx = x - np.mean(x)
    dy = y - np.mean(y)
    sx = float(np.sqrt(np.sum(dx * dx)))
    sy = float(np.sqrt(np.sum(dy * dy)))
    if sx == 0.0 or sy == 0.0:
        return 0.0
    return float(np.sum(dx * dy) / (sx * sy))


def lag1_autocorr(x: np.ndarray) -> float:
    """Pearson correlation between the series and itself shifted by one."""
    x = as_1d(x, "x", min_length=3)
    return pearson(x[:-1], x[1:])


def dynamic_features(
    speed: np.ndarray, accel: np.ndarray, jerk: np.ndarray
) -> np.ndarray:
    """Four coupling features in :data:`DYNAMIC_NAMES` order."""
    return np.array(
        [
            pearson(speed, accel),
            pearson(accel, jerk),
            lag1_autocorr(speed),
            lag1_autocorr(accel),
        ]
    )


# ---------------------------------------------------------------------------
# derived signals


def _rolling(series: np.ndarray, window: int, kind: str) -> np.ndarray:
    """Trailing-window rolling statistic; windows shrink at the head."""
    x = np.asarray(series, dtype=np.float64)
    out = np.empty_like(x)
    for i in range(len(x)):
        chunk = x[max(0, i - window + 1) : i + 1]
        if kind == "mean":
            out[i] = np.mean(chunk)
        elif kind == "std":
            out[i] = np.std(chunk)
        else:
            out[i] = np.max(chunk)
    return out


def _forward_diff(series: np.ndarray) -> np.ndarray:
    """Per-sample forward difference, last value repeated."""
    x = np.asarray(series, dtype=np.float64)
    out = np.empty_like(x)
    out[:-1] = np.diff(x)
    out[-1] = out[-2]
    return out


def resolve_signal(spec: str, segment: TrajectorySegment) -> np.ndarray:
    """Materialize a signal expression against a segment.

    Base signals are ``speed``, ``acceleration`` and ``jerk``.  Derived
    signals chain prefix operators separated by colons, e.g.
    ``abs:diff:speed`` or ``rollmean5:acceleration``.  Operators:
    ``abs``, ``pos`` (positive part), ``neg`` (negative part), ``diff``
    (forward difference) and ``rollmean<w>``, ``rollstd<w>``,
    ``rollmax<w>`` for trailing windows of ``w`` samples.
    """
    if spec == "speed":
        return segment.speed
    if spec == "acceleration":
        return segment.accel
    if spec == "jerk":
        return segment.jerk
    if ":" not in spec:
        raise ConfigError(f"unknown signal {spec!r}")
    op, rest = spec.split(":", 1)
    inner = resolve_signal(rest, segment)
    if op == "abs":
        return np.abs(inner)
    if op == "pos":
        return np.maximum(inner, 0.0)
    if op == "neg":
        return np.minimum(inner, 0.0)
    if op == "diff":
        return _forward_diff(inner)
    for kind in ("rollmean", "rollstd", "rollmax"):
        if op.startswith(kind):
            try:
                window = int(op[len(kind) :])
            except ValueError:
                raise ConfigError(f"bad rolling window in signal {spec!r}") from None
            if window < 1:
                raise ConfigError(f"rolling window must be positive in {spec!r}")
            return _rolling(inner, window, kind[4:])
    raise ConfigError(f"unknown signal operator {op!r} in {spec!r}")


def signal_key(spec: str) -> str:
    """File- and header-safe name for a signal expression."""
    return spec.replace(":", "_")


# ---------------------------------------------------------------------------
# assembly


@dataclass
class FeatureVector:
    """A named feature vector for one segment."""

    values: np.ndarray
    names: tuple[str, ...]
    segment_id: str = ""
    label: StyleLabel | None = None

    @property
    def dim(self) -> int:
        return int(self.values.shape[0])

    def as_dict(self) -> dict[str, float]:
        return {name: float(v) for name, v in zip(self.names, self.values)}


def feature_names(signals: tuple[str, ...] = DEFAULT_SIGNALS) -> tuple[str, ...]:
    """Full feature roster for a signal list: per-signal statistics first,
    then behavioral, then dynamic features."""
    names: list[str] = []
    for spec in signals:
        key = signal_key(spec)
        names.extend(f"{key}_{stat}" for stat in STAT_NAMES)
    names.extend(BEHAVIOR_NAMES)
    names.extend(DYNAMIC_NAMES)
    return tuple(names)


def extract_features(
    segment: TrajectorySegment,
    signals: tuple[str, ...] = DEFAULT_SIGNALS,
    tau: float = DEFAULT_TAU,
) -> FeatureVector:
    """Compute the full feature vector for one segment."""
    if not signals:
        raise ConfigError("signal list must not be empty")
    blocks = [stat_features(resolve_signal(spec, segment)) for spec in signals]
    blocks.append(behavior_features(segment.speed, segment.accel, segment.jerk, tau))
    blocks.append(dynamic_features(segment.speed, segment.accel, segment.jerk))
    values = np.concatenate(blocks)
    names = feature_names(signals)
    assert values.shape[0] == len(names) == feature_dimension(len(signals))
    return FeatureVector(
        values=values, names=names, segment_id=segment.segment_id, label=segment.label
    )


# ---------------------------------------------------------------------------
# normalization


@dataclass
class NormStats:
    """Per-feature mean and standard deviation for z-score normalization.

    Zero-variance features store a standard deviation of 1.0 so their
    normalized value is exactly zero.
    """

    names: tuple[str, ...]
    mean: np.ndarray
    std: np.ndarray

    @classmethod
    def fit(cls, matrix: np.ndarray, names: tuple[str, ...]) -> "NormStats":
        x = as_2d(matrix, "feature matrix")
        if x.shape[1] != len(names):
            raise LengthMismatchError(
                f"matrix has {x.shape[1]} columns but {len(names)} names given"
            )
        mean = np.mean(x, axis=0)
        std = np.std(x, axis=0)
        std = np.where(std == 0.0, 1.0, std)
        return cls(names=tuple(names), mean=mean, std=std)

    def apply(self, values: np.ndarray) -> np.ndarray:
        arr = np.asarray(values, dtype=np.float64)
        if arr.shape[-1] != len(self.names):
            raise LengthMismatchError(
                f"vector has {arr.shape[-1]} entries, stats have {len(self.names)}"
            )
        return (arr - self.mean) / self.std

    def invert(self, values: np.ndarray) -> np.ndarray:
        return np.asarray(values, dtype=np.float64) * self.std + self.mean

    def save(self, path: str) -> None:
        payload = {
            "names": list(self.names),
            "mean": [float(v) for v in self.mean],
            "std": [float(v) for v in self.std],
        }
        with open(path, "w") as fh:
            json.dump(payload, fh, indent=2)

    @classmethod
    def load(cls, path: str) -> "NormStats":
        with open(path) as fh:
            payload = json.load(fh)
        return cls(
            names=tuple(payload["names"]),
            mean=np.array(payload["mean"], dtype=np.float64),
            std=np.array(payload["std"], dtype=np.float64),
        )


# ---------------------------------------------------------------------------
# sklearn-style transformers


class FeatureExtractor(TransformerMixin, BaseEstimator):
    """Turns a list of :class:`TrajectorySegment` into a feature matrix."""

    def __init__(self, signals: tuple[str, ...] = DEFAULT_SIGNALS, tau: float = DEFAULT_TAU):
        self.signals = signals
        self.tau = tau

    def fit(self, X, y=None):
        return self

    def transform(self, X) -> np.ndarray:
        rows = [extract_features(seg, tuple(self.signals), self.tau).values for seg in X]
        if not rows:
            return np.empty((0, feature_dimension(len(self.signals))))
        return np.stack(rows)

    def get_feature_names_out(self, input_features=None):
        return np.array(feature_names(tuple(self.signals)), dtype=object)


class FeatureNormalizer(TransformerMixin, BaseEstimator):
    """Z-score normalizer with the zero-variance convention of
    :class:`NormStats`."""

    def __init__(self, names: tuple[str, ...] | None = None):
        self.names = names

    def fit(self, X, y=None):
        x = as_2d(X, "feature matrix")
        names = tuple(self.names) if self.names else tuple(
            f"f{i}" for i in range(x.shape[1])
        )
        self.stats_ = NormStats.fit(x, names)
        return self

    def transform(self, X) -> np.ndarray:
        if not hasattr(self, "stats_"):
            raise ConfigError("FeatureNormalizer.transform called before fit")
        return self.stats_.apply(as_2d(X, "feature matrix"))

    def inverse_transform(self, X) -> np.ndarray:
        if not hasattr(self, "stats_"):
            raise ConfigError("FeatureNormalizer.inverse_transform called before fit")
        return self.stats_.invert(as_2d(X, "feature matrix"))


# ---------------------------------------------------------------------------
# feature CSV I/O


def write_feature_csv(
    path: str,
    ids: list[str],
    labels: list[StyleLabel | None],
    matrix: np.ndarray,
    names: tuple[str, ...],
) -> None:
    """Write one row per segment: id, label (may be empty), then features."""
    import csv as _csv

    matrix = as_2d(matrix, "feature matrix")
    with open(path, "w", newline="") as fh:
        writer = _csv.writer(fh)
        writer.writerow(["segment_id", "label", *names])
        for i, seg_id in enumerate(ids):
            label = labels[i]
            writer.writerow(
                [seg_id, label.display if label is not None else ""]
                + [repr(float(v)) for v in matrix[i]]
            )


def read_feature_csv(path: str):
    """Inverse of :func:`write_feature_csv`.

    Returns ``(ids, labels, matrix, names)``; labels are None where the
    label cell is empty.
    """
    import csv as _csv

    with open(path, newline="") as fh:
        reader = _csv.reader(fh)
        header = next(reader)
        if header[:2] != ["segment_id", "label"]:
            raise MissingColumnError("segment_id,label", path=path)
        names = tuple(header[2:])
        ids: list[str] = []
        labels: list[StyleLabel | None] = []
        rows: list[list[float]] = []
        for cells in reader:
            if not cells:
                continue
            ids.append(cells[0])
            labels.append(StyleLabel.parse(cells[1]) if cells[1].strip() else None)
            rows.append([float(c) for c in cells[2:]])
    matrix = np.array(rows, dtype=np.float64) if rows else np.empty((0, len(names)))
    return ids, labels, matrix, names
