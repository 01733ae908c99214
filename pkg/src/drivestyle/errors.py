"""Exception hierarchy shared across the package.

Four broad families map onto CLI exit codes: configuration problems (2),
data problems (3), remote-service problems (4) and numeric failures (5).
"""

from __future__ import annotations


class DriveStyleError(Exception):
    """Base class for every error raised by this package."""


class ConfigError(DriveStyleError):
    """Invalid or inconsistent run configuration."""


class DataError(DriveStyleError):
    """Malformed, inconsistent or insufficient input data."""


class ServiceError(DriveStyleError):
    """A remote service could not produce a usable response."""


class NumericError(DriveStyleError):
    """A numeric invariant was violated at runtime."""


# ---------------------------------------------------------------------------
# data errors


class MissingColumnError(DataError):
    def __init__(self, column: str, path: str = "") -> None:
        self.column = column
        self.path = path
        where = f" in {path}" if path else ""
        super().__init__(f"required column {column!r} missing{where}")


class NonFiniteValueError(DataError):
    """A value failed to parse as a finite float.  ``row`` is the 0-based
    index of the offending data row (header excluded)."""

    def __init__(self, row: int, column: str = "", path: str = "") -> None:
        self.row = row
        self.column = column
        self.path = path
        where = f" in {path}" if path else ""
        col = f" column {column!r}" if column else ""
        super().__init__(f"non-finite or unparseable value at row {row}{col}{where}")


class TooShortError(DataError):
    def __init__(self, length: int, minimum: int, what: str = "segment") -> None:
        self.length = length
        self.minimum = minimum
        super().__init__(f"{what} has {length} samples, needs at least {minimum}")


class NonMonotonicTimeError(DataError):
    def __init__(self, row: int, path: str = "") -> None:
        self.row = row
        self.path = path
        where = f" in {path}" if path else ""
        super().__init__(f"timestamps not strictly increasing at row {row}{where}")


class LengthMismatchError(DataError):
    def __init__(self, detail: str) -> None:
        super().__init__(detail)


class UnknownLabelError(DataError):
    def __init__(self, label: str) -> None:
        self.label = label
        super().__init__(f"unknown style label {label!r}")


class EmptyTrainingSetError(DataError):
    def __init__(self, detail: str = "training set is empty") -> None:
        super().__init__(detail)


class ClassTooSmallError(DataError):
    def __init__(self, label: int, count: int, minimum: int) -> None:
        self.label = label
        self.count = count
        super().__init__(
            f"class {label} has {count} samples, needs at least {minimum} to split"
        )


class EmptySplitError(DataError):
    def __init__(self, which: str) -> None:
        super().__init__(f"split {which!r} received no samples")


class EmptyTextError(DataError):
    def __init__(self) -> None:
        super().__init__("cannot embed empty or whitespace-only text")


class UnknownFeatureError(DataError):
    def __init__(self, name: str) -> None:
        self.name = name
        super().__init__(f"unknown feature name {name!r}")


class TooFewError(DataError):
    """Not enough samples for the requested statistic."""

    def __init__(self, detail: str) -> None:
        super().__init__(detail)


class BadSpecError(DataError):
    def __init__(self, detail: str) -> None:
        super().__init__(detail)


class CorruptCheckpointError(DataError):
    def __init__(self, detail: str) -> None:
        super().__init__(detail)


class VersionMismatchError(DataError):
    def __init__(self, found: object, expected: object) -> None:
        super().__init__(f"checkpoint format version {found!r}, expected {expected!r}")


class FingerprintMismatchError(DataError):
    def __init__(self, found: str, expected: str) -> None:
        self.found = found
        self.expected = expected
        super().__init__(
            f"checkpoint fingerprint {found[:12]}... does not match "
            f"expected {expected[:12]}..."
        )


# ---------------------------------------------------------------------------
# service errors


class NetworkError(ServiceError):
    def __init__(self, detail: str) -> None:
        super().__init__(detail)


class AuthError(ServiceError):
    def __init__(self, status: int) -> None:
        self.status = status
        super().__init__(f"authentication rejected by remote service (HTTP {status})")


class RateLimitedError(ServiceError):
    def __init__(self, attempts: int) -> None:
        self.attempts = attempts
        super().__init__(f"rate limited after {attempts} attempts")


class MalformedResponseError(ServiceError):
    def __init__(self, detail: str) -> None:
        super().__init__(detail)


class MissingCredentialError(ConfigError):
    def __init__(self, env_var: str) -> None:
        self.env_var = env_var
        super().__init__(
            f"remote endpoint configured but environment variable {env_var} is unset"
        )


# ---------------------------------------------------------------------------
# numeric errors


class ShapeMismatchError(NumericError):
    def __init__(self, detail: str) -> None:
        super().__init__(detail)


class DimensionMismatchError(NumericError):
    def __init__(self, expected: int, found: int, what: str = "vector") -> None:
        self.expected = expected
        self.found = found
        super().__init__(f"{what} has dimension {found}, expected {expected}")


class WrongDimensionError(NumericError):
    def __init__(self, expected: int, found: int) -> None:
        self.expected = expected
        self.found = found
        super().__init__(f"embedding has dimension {found}, expected {expected}")


class EvenKernelError(NumericError):
    def __init__(self, kernel: int) -> None:
        self.kernel = kernel
        super().__init__(f"convolution kernel size must be odd, got {kernel}")


class DegenerateBatchError(NumericError):
    def __init__(self, detail: str) -> None:
        super().__init__(detail)


class BadLabelError(NumericError):
    def __init__(self, label: int, n_classes: int) -> None:
        self.label = label
        super().__init__(f"label {label} outside [0, {n_classes})")


class BadRateError(NumericError):
    def __init__(self, rate: float) -> None:
        self.rate = rate
        super().__init__(f"dropout rate {rate} outside [0, 1)")


class NonfiniteLossError(NumericError):
    def __init__(self, epoch: int, batch: int) -> None:
        self.epoch = epoch
        self.batch = batch
        super().__init__(f"loss became non-finite at epoch {epoch}, batch {batch}")


class UnknownVariantError(ConfigError):
    def __init__(self, variant: str, known: tuple[str, ...]) -> None:
        self.variant = variant
        super().__init__(f"unknown model variant {variant!r}; known: {', '.join(known)}")
