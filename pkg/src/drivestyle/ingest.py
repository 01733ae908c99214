"""Trajectory CSV parsing, validation and cleaning.

One CSV file holds one segment: a header row naming the columns
``time_s, speed_mps, accel_mps2`` plus optional ``jerk_mps3`` and
``label`` columns, followed by one row per sample.  Files written by
:func:`write_segment` round-trip exactly through :func:`parse_segment`.
"""

from __future__ import annotations

import csv
import enum
import math
import os
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DataError,
    LengthMismatchError,
    MissingColumnError,
    NonFiniteValueError,
    NonMonotonicTimeError,
    TooShortError,
    UnknownLabelError,
)

TIME_COLUMN = "time_s"
SPEED_COLUMN = "speed_mps"
ACCEL_COLUMN = "accel_mps2"
JERK_COLUMN = "jerk_mps3"
LABEL_COLUMN = "label"
REQUIRED_COLUMNS = (TIME_COLUMN, SPEED_COLUMN, ACCEL_COLUMN)

MIN_SEGMENT_LENGTH = 2
NOMINAL_DT = 0.1  # seconds between samples at the native recording rate


class StyleLabel(enum.IntEnum):
    """The four driving styles, with stable integer codes 0..3."""

    AGGRESSIVE = 0
    ASSERTIVE = 1
    CONSERVATIVE = 2
    MODERATE = 3

    @classmethod
    def parse(cls, text: str) -> "StyleLabel":
        try:
            return cls[text.strip().upper()]
        except KeyError:
            raise UnknownLabelError(text) from None

    @property
    def display(self) -> str:
        return self.name.capitalize()


N_CLASSES = len(StyleLabel)
CLASS_NAMES = tuple(label.display for label in StyleLabel)


@dataclass
class TrajectorySegment:
    """A uniformly sampled kinematic trace for a single trip segment."""

    segment_id: str
    time: np.ndarray  # [T] seconds, strictly increasing
    speed: np.ndarray  # [T] m/s
    accel: np.ndarray  # [T] m/s^2
    jerk: np.ndarray  # [T] m/s^3
    label: StyleLabel | None = None

    def __len__(self) -> int:
        return int(self.time.shape[0])

    def validate(self) -> None:
        """Check the structural invariants; raise a DataError otherwise."""
        n = len(self.time)
        if n < MIN_SEGMENT_LENGTH:
            raise TooShortError(n, MIN_SEGMENT_LENGTH)
        for name, series in self.series().items():
            if len(series) != n:
                raise LengthMismatchError(
                    f"{name} has length {len(series)}, time has length {n}"
                )
            if not np.all(np.isfinite(series)):
                bad = int(np.flatnonzero(~np.isfinite(series))[0])
                raise NonFiniteValueError(row=bad, column=name)
        steps = np.diff(self.time)
        if np.any(steps <= 0):
            raise NonMonotonicTimeError(row=int(np.flatnonzero(steps <= 0)[0]) + 1)

    def series(self) -> dict[str, np.ndarray]:
        return {
            "time": self.time,
            "speed": self.speed,
            "accel": self.accel,
            "jerk": self.jerk,
        }


def derive_jerk(accel: np.ndarray, time: np.ndarray) -> np.ndarray:
    """Forward-difference jerk from acceleration; the last value is repeated
    so the output matches the input length."""
    accel = np.asarray(accel, dtype=np.float64)
    time = np.asarray(time, dtype=np.float64)
    if len(accel) < 2:
        return np.zeros_like(accel)
    jerk = np.empty_like(accel)
    jerk[:-1] = np.diff(accel) / np.diff(time)
    jerk[-1] = jerk[-2]
    return jerk


def _parse_cell(raw: str, row: int, column: str, path: str) -> float:
    try:
        value = float(raw)
    except (TypeError, ValueError):
        raise NonFiniteValueError(row=row, column=column, path=path) from None
    if not math.isfinite(value):
        raise NonFiniteValueError(row=row, column=column, path=path)
    return value


def parse_segment(path: str, segment_id: str | None = None) -> TrajectorySegment:
    """Read one segment CSV and return a validated :class:`TrajectorySegment`.

    Jerk is derived by forward differences when the ``jerk_mps3`` column is
    absent.  The label, when present, is taken from the first data row and
    parsed case-insensitively.
    """
    if segment_id is None:
        segment_id = os.path.splitext(os.path.basename(path))[0]
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise TooShortError(0, MIN_SEGMENT_LENGTH) from None
        header = [name.strip() for name in header]
        for column in REQUIRED_COLUMNS:
            if column not in header:
                raise MissingColumnError(column, path=path)
        index = {name: header.index(name) for name in header}
        has_jerk = JERK_COLUMN in index
        has_label = LABEL_COLUMN in index

        times: list[float] = []
        speeds: list[float] = []
        accels: list[float] = []
        jerks: list[float] = []
        label: StyleLabel | None = None
        for row, cells in enumerate(reader):
            if not cells or all(not cell.strip() for cell in cells):
                continue
            times.append(_parse_cell(cells[index[TIME_COLUMN]], row, TIME_COLUMN, path))
            speeds.append(_parse_cell(cells[index[SPEED_COLUMN]], row, SPEED_COLUMN, path))
            accels.append(_parse_cell(cells[index[ACCEL_COLUMN]], row, ACCEL_COLUMN, path))
            if has_jerk:
                jerks.append(_parse_cell(cells[index[JERK_COLUMN]], row, JERK_COLUMN, path))
            if has_label and row == 0:
                label = StyleLabel.parse(cells[index[LABEL_COLUMN]])

    if len(times) < MIN_SEGMENT_LENGTH:
        raise TooShortError(len(times), MIN_SEGMENT_LENGTH)
    time = np.array(times, dtype=np.float64)
    accel = np.array(accels, dtype=np.float64)
    jerk = np.array(jerks, dtype=np.float64) if has_jerk else derive_jerk(accel, time)
    segment = TrajectorySegment(
        segment_id=segment_id,
        time=time,
        speed=np.array(speeds, dtype=np.float64),
        accel=accel,
        jerk=jerk,
        label=label,
    )
    segment.validate()
    return segment


def write_segment(segment: TrajectorySegment, path: str) -> None:
    """Write a segment to CSV with full float precision."""
    columns = [TIME_COLUMN, SPEED_COLUMN, ACCEL_COLUMN, JERK_COLUMN]
    if segment.label is not None:
        columns.append(LABEL_COLUMN)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(columns)
        for i in range(len(segment)):
            row = [
                repr(float(segment.time[i])),
                repr(float(segment.speed[i])),
                repr(float(segment.accel[i])),
                repr(float(segment.jerk[i])),
            ]
            if segment.label is not None:
                row.append(segment.label.display if i == 0 else "")
            writer.writerow(row)


def load_segments_dir(directory: str, skip_bad: bool = False):
    """Parse every ``*.csv`` under ``directory`` in sorted order.

    Returns ``(segments, skipped)`` where ``skipped`` maps file name to the
    error message.  Without ``skip_bad`` the first bad file aborts the load.
    """
    segments: list[TrajectorySegment] = []
    skipped: dict[str, str] = {}
    try:
        entries = os.listdir(directory)
    except OSError as err:
        raise DataError(f"cannot read segment directory {directory}: {err}") from None
    names = sorted(n for n in entries if n.endswith(".csv"))
    for name in names:
        path = os.path.join(directory, name)
        try:
            segments.append(parse_segment(path))
        except Exception as err:
            if not skip_bad:
                raise
            skipped[name] = str(err)
    return segments, skipped


# ---------------------------------------------------------------------------
# cleaning


@dataclass
class CleanConfig:
    """Bounds and options for :func:`clean_segments`.

    Physical bounds are magnitudes: samples are clipped into
    ``[-bound, bound]``.  ``max_gap_factor`` times the nominal step is the
    largest tolerated spacing between consecutive timestamps.
    """

    speed_bound: float = 60.0
    accel_bound: float = 15.0
    jerk_bound: float = 60.0
    smooth: bool = False
    smooth_window: int = 3
    nominal_dt: float = NOMINAL_DT
    max_gap_factor: float = 2.0


@dataclass
class DropReport:
    """Per-reason counts of segments removed during cleaning."""

    total_in: int = 0
    total_kept: int = 0
    dropped: dict[str, list[str]] = field(default_factory=dict)

    def record(self, reason: str, segment_id: str) -> None:
        self.dropped.setdefault(reason, []).append(segment_id)

    @property
    def total_dropped(self) -> int:
        return sum(len(ids) for ids in self.dropped.values())

    def as_dict(self) -> dict:
        return {
            "total_in": self.total_in,
            "total_kept": self.total_kept,
            "total_dropped": self.total_dropped,
            "dropped": {reason: sorted(ids) for reason, ids in self.dropped.items()},
        }


def _moving_average(series: np.ndarray, window: int) -> np.ndarray:
    """Centered moving average; the window shrinks near the edges."""
    n = len(series)
    half = window // 2
    out = np.empty_like(series)
    cumsum = np.concatenate([[0.0], np.cumsum(series)])
    for i in range(n):
        lo = max(0, i - half)
        hi = min(n, i + half + 1)
        out[i] = (cumsum[hi] - cumsum[lo]) / (hi - lo)
    return out


def clean_segments(
    segments: list[TrajectorySegment], config: CleanConfig | None = None
) -> tuple[list[TrajectorySegment], DropReport]:
    """Drop unusable segments and clip the rest into physical bounds.

    Rules, in order: segments whose speed never exceeds zero are dropped;
    segments with a timestamp gap wider than ``max_gap_factor`` nominal steps
    are dropped; surviving series are clipped into the configured magnitude
    bounds and optionally smoothed with a centered moving average.  With
    smoothing disabled the operation is idempotent: cleaning an
    already-clean list is the identity.
    """
    if config is None:
        config = CleanConfig()
    report = DropReport(total_in=len(segments))
    kept: list[TrajectorySegment] = []
    max_gap = config.max_gap_factor * config.nominal_dt
    for segment in segments:
        if not np.any(segment.speed > 0.0):
            report.record("speed_never_positive", segment.segment_id)
            continue
        if np.max(np.diff(segment.time)) > max_gap * (1.0 + 1e-9):
            report.record("time_gap_too_wide", segment.segment_id)
            continue
        speed = np.clip(segment.speed, -config.speed_bound, config.speed_bound)
        accel = np.clip(segment.accel, -config.accel_bound, config.accel_bound)
        jerk = np.clip(segment.jerk, -config.jerk_bound, config.jerk_bound)
        if config.smooth:
            speed = _moving_average(speed, config.smooth_window)
            accel = _moving_average(accel, config.smooth_window)
            jerk = _moving_average(jerk, config.smooth_window)
        kept.append(
            TrajectorySegment(
                segment_id=segment.segment_id,
                time=segment.time.copy(),
                speed=speed,
                accel=accel,
                jerk=jerk,
                label=segment.label,
            )
        )
    report.total_kept = len(kept)
    return kept, report
