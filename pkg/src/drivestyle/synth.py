"""Synthetic trajectory generator with style-dependent dynamics.

Speed follows a mean-reverting random walk around a per-style cruise
speed.  Acceleration is the (clipped) forward difference of speed plus
style-scaled roughness noise, with hard acceleration and braking events
injected as pulses that exceed the detection threshold by a margin.  Jerk
is the forward difference of acceleration.  Styles differ in cruise
speed, speed volatility, event rates and roughness, so their feature
distributions separate cleanly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import BadSpecError
from .features import DEFAULT_TAU
from .ingest import NOMINAL_DT, StyleLabel, TrajectorySegment

MIN_SYNTH_LENGTH = 50


@dataclass
class SynthStyleSpec:
    """Generator knobs for one driving style."""

    label: StyleLabel
    speed_mean: float
    speed_std: float
    accel_events_per_100: float
    brake_events_per_100: float
    roughness: float  # std of extra acceleration noise
    smoothing: float  # 0..1, higher means stronger mean reversion damping

    def validate(self) -> None:
        if self.speed_mean <= 0:
            raise BadSpecError(f"{self.label.display}: speed_mean must be positive")
        if self.speed_std < 0:
            raise BadSpecError(f"{self.label.display}: speed_std must be non-negative")
        if self.accel_events_per_100 < 0 or self.brake_events_per_100 < 0:
            raise BadSpecError(f"{self.label.display}: event rates must be non-negative")
        if self.roughness < 0:
            raise BadSpecError(f"{self.label.display}: roughness must be non-negative")
        if not 0.0 <= self.smoothing < 1.0:
            raise BadSpecError(f"{self.label.display}: smoothing must lie in [0, 1)")


DEFAULT_STYLE_SPECS = (
    SynthStyleSpec(StyleLabel.AGGRESSIVE, 28.0, 6.0, 8.0, 8.0, 1.2, 0.25),
    SynthStyleSpec(StyleLabel.ASSERTIVE, 22.0, 4.5, 4.0, 4.0, 0.8, 0.45),
    SynthStyleSpec(StyleLabel.CONSERVATIVE, 9.0, 1.8, 0.3, 0.3, 0.25, 0.85),
    SynthStyleSpec(StyleLabel.MODERATE, 15.0, 3.0, 1.5, 1.5, 0.45, 0.65),
)


def _generate_one(
    spec: SynthStyleSpec,
    length: int,
    dt: float,
    tau: float,
    margin: float,
    rng: np.random.Generator,
    segment_id: str,
) -> TrajectorySegment:
    kappa = 1.0 - spec.smoothing
    noise_scale = spec.speed_std * np.sqrt(max(kappa * (2.0 - kappa), 1e-6))
    v = np.empty(length)
    v[0] = spec.speed_mean + spec.speed_std * rng.standard_normal()
    shocks = rng.standard_normal(length - 1)
    for t in range(1, length):
        v[t] = v[t - 1] + kappa * (spec.speed_mean - v[t - 1]) + noise_scale * shocks[t - 1]
    np.maximum(v, 0.1, out=v)

    # base acceleration stays inside the detection threshold
    accel = np.empty(length)
    accel[:-1] = np.diff(v) / dt
    accel[-1] = accel[-2]
    np.clip(accel, -0.8 * tau, 0.8 * tau, out=accel)
    accel += spec.roughness * rng.standard_normal(length)
    np.clip(accel, -0.95 * tau, 0.95 * tau, out=accel)

    n_accel = int(rng.binomial(length, spec.accel_events_per_100 / 100.0))
    n_brake = int(rng.binomial(length, spec.brake_events_per_100 / 100.0))
    positions = rng.permutation(length)
    accel[positions[:n_accel]] = tau + margin
    accel[positions[n_accel : n_accel + n_brake]] = -(tau + margin)

    jerk = np.empty(length)
    jerk[:-1] = np.diff(accel) / dt
    jerk[-1] = jerk[-2]

    return TrajectorySegment(
        segment_id=segment_id,
        time=np.arange(length) * dt,
        speed=v,
        accel=accel,
        jerk=jerk,
        label=spec.label,
    )


def gen_synthetic(
    n_per_class: int,
    length: int = 150,
    dt: float = NOMINAL_DT,
    seed: int = 0,
    specs: tuple[SynthStyleSpec, ...] = DEFAULT_STYLE_SPECS,
    tau: float = DEFAULT_TAU,
    margin: float = 1.0,
) -> list[TrajectorySegment]:
    """Generate ``n_per_class`` labeled segments per style spec.

    Fully deterministic for a seed: each segment draws from its own
    stream keyed by (style, index), so changing one segment's draws cannot
    shift another's and growing the batch keeps earlier segments bitwise
    identical.
    """
    if n_per_class < 1:
        raise BadSpecError("n_per_class must be positive")
    if length < MIN_SYNTH_LENGTH:
        raise BadSpecError(f"length must be at least {MIN_SYNTH_LENGTH}, got {length}")
    if dt <= 0:
        raise BadSpecError("dt must be positive")
    if margin <= 0:
        raise BadSpecError("margin must be positive")
    labels = [spec.label for spec in specs]
    if len(set(labels)) != len(labels):
        raise BadSpecError("style specs must have distinct labels")
    for spec in specs:
        spec.validate()
    segments: list[TrajectorySegment] = []
    for spec_i, spec in enumerate(specs):
        for j in range(n_per_class):
            child = np.random.SeedSequence([seed, 0x5EED], spawn_key=(spec_i, j))
            rng = np.random.Generator(np.random.Philox(child))
            segment_id = f"{spec.label.display.lower()}_{j:04d}"
            segment = _generate_one(spec, length, dt, tau, margin, rng, segment_id)
            segment.validate()
            segments.append(segment)
    return segments
