"""Input validation helpers used across transformers and the classifier."""

from __future__ import annotations

import numpy as np

from .errors import (
    DimensionMismatchError,
    LengthMismatchError,
    NonFiniteValueError,
    ShapeMismatchError,
    TooShortError,
)


def as_float_array(x, name: str = "array") -> np.ndarray:
    """Coerce to a float64 ndarray, rejecting non-finite entries."""
    arr = np.asarray(x, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        bad = int(np.flatnonzero(~np.isfinite(arr.ravel()))[0])
        raise NonFiniteValueError(row=bad, column=name)
    return arr


def as_1d(x, name: str = "series", min_length: int = 1) -> np.ndarray:
    arr = as_float_array(x, name)
    if arr.ndim != 1:
        raise ShapeMismatchError(f"{name} must be 1-d, got shape {arr.shape}")
    if arr.shape[0] < min_length:
        raise TooShortError(arr.shape[0], min_length, what=name)
    return arr


def as_2d(x, name: str = "matrix") -> np.ndarray:
    arr = as_float_array(x, name)
    if arr.ndim == 1:
        arr = arr.reshape(1, -1)
    if arr.ndim != 2:
        raise ShapeMismatchError(f"{name} must be 2-d, got shape {arr.shape}")
    return arr


def check_same_length(name_a: str, a, name_b: str, b) -> None:
    if len(a) != len(b):
        raise LengthMismatchError(
            f"{name_a} has length {len(a)} but {name_b} has length {len(b)}"
        )


def check_dimension(arr: np.ndarray, expected: int, what: str = "vector") -> None:
    found = arr.shape[-1]
    if found != expected:
        raise DimensionMismatchError(expected, found, what=what)


def check_labels(y, n_classes: int) -> np.ndarray:
    """Coerce labels to an int64 vector and range-check against n_classes."""
    from .errors import BadLabelError

    arr = np.asarray(y)
    if arr.ndim != 1:
        raise ShapeMismatchError(f"labels must be 1-d, got shape {arr.shape}")
    if arr.size and not np.issubdtype(arr.dtype, np.integer):
        rounded = np.rint(arr.astype(np.float64))
        if not np.allclose(arr.astype(np.float64), rounded):
            raise BadLabelError(int(arr[0]), n_classes)
        arr = rounded
    arr = arr.astype(np.int64)
    for value in arr:
        if value < 0 or value >= n_classes:
            raise BadLabelError(int(value), n_classes)
    return arr
