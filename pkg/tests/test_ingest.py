"""Trajectory parsing, validation and cleaning."""

import numpy as np
import pytest

from drivestyle.errors import (
    MissingColumnError,
    NonFiniteValueError,
    NonMonotonicTimeError,
    TooShortError,
    UnknownLabelError,
)
from drivestyle.ingest import (
    CleanConfig,
    StyleLabel,
    TrajectorySegment,
    clean_segments,
    derive_jerk,
    load_segments_dir,
    parse_segment,
    write_segment,
)


def make_segment(
    segment_id="seg", speed=None, accel=None, jerk=None, n=10, dt=0.1, label=None
):
    time = np.arange(n) * dt
    speed = np.asarray(speed, dtype=float) if speed is not None else np.full(n, 10.0)
    accel = np.asarray(accel, dtype=float) if accel is not None else np.zeros(n)
    jerk = np.asarray(jerk, dtype=float) if jerk is not None else np.zeros(n)
    return TrajectorySegment(
        segment_id=segment_id,
        time=time[: len(speed)],
        speed=speed,
        accel=accel,
        jerk=jerk,
        label=label,
    )


def write_csv(path, rows, header="time_s,speed_mps,accel_mps2"):
    path.write_text(header + "\n" + "\n".join(rows) + "\n")


def test_jerk_forward_difference_with_last_repeated():
    accel = np.array([0.0, 1.0, 1.0])
    time = np.array([0.0, 0.1, 0.2])
    jerk = derive_jerk(accel, time)
    assert jerk == pytest.approx([10.0, 0.0, 0.0], abs=1e-12)


def test_jerk_uses_actual_time_steps():
    accel = np.array([0.0, 2.0, 2.0, 5.0])
    time = np.array([0.0, 0.5, 1.0, 3.0])
    jerk = derive_jerk(accel, time)
    assert jerk == pytest.approx([4.0, 0.0, 1.5, 1.5])


def test_parse_segment_minimal(tmp_path):
    path = tmp_path / "a.csv"
    write_csv(path, ["0.0,5.0,0.1", "0.1,5.1,0.2", "0.2,5.2,0.1"])
    segment = parse_segment(str(path))
    assert segment.segment_id == "a"
    assert len(segment) == 3
    assert segment.speed == pytest.approx([5.0, 5.1, 5.2])
    # jerk derived from forward differences of acceleration
    assert segment.jerk == pytest.approx([1.0, -1.0, -1.0])
    assert segment.label is None


def test_parse_segment_with_jerk_and_label(tmp_path):
    path = tmp_path / "b.csv"
    write_csv(
        path,
        ["0.0,5.0,0.1,0.0,Aggressive", "0.1,5.1,0.2,0.1,"],
        header="time_s,speed_mps,accel_mps2,jerk_mps3,label",
    )
    segment = parse_segment(str(path))
    assert segment.label is StyleLabel.AGGRESSIVE
    assert segment.jerk == pytest.approx([0.0, 0.1])


def test_parse_segment_label_case_insensitive(tmp_path):
    path = tmp_path / "c.csv"
    write_csv(
        path,
        ["0.0,5.0,0.1,moderate", "0.1,5.1,0.2,"],
        header="time_s,speed_mps,accel_mps2,label",
    )
    assert parse_segment(str(path)).label is StyleLabel.MODERATE


def test_parse_segment_unknown_label(tmp_path):
    path = tmp_path / "c.csv"
    write_csv(
        path,
        ["0.0,5.0,0.1,reckless", "0.1,5.1,0.2,"],
        header="time_s,speed_mps,accel_mps2,label",
    )
    with pytest.raises(UnknownLabelError):
        parse_segment(str(path))


def test_parse_segment_missing_column(tmp_path):
    path = tmp_path / "d.csv"
    write_csv(path, ["0.0,5.0", "0.1,5.1"], header="time_s,speed_mps")
    with pytest.raises(MissingColumnError) as excinfo:
        parse_segment(str(path))
    assert excinfo.value.column == "accel_mps2"


def test_parse_segment_nan_reports_data_row_index(tmp_path):
    path = tmp_path / "e.csv"
    rows = [f"{0.1 * i:.1f},5.0,0.0" for i in range(10)]
    rows[7] = "0.7,nan,0.0"
    write_csv(path, rows)
    with pytest.raises(NonFiniteValueError) as excinfo:
        parse_segment(str(path))
    assert excinfo.value.row == 7
    assert excinfo.value.column == "speed_mps"


def test_parse_segment_unparseable_cell(tmp_path):
    path = tmp_path / "f.csv"
    write_csv(path, ["0.0,5.0,0.0", "0.1,abc,0.0"])
    with pytest.raises(NonFiniteValueError) as excinfo:
        parse_segment(str(path))
    assert excinfo.value.row == 1


def test_parse_segment_non_monotonic_time(tmp_path):
    path = tmp_path / "g.csv"
    write_csv(path, ["0.0,5.0,0.0", "0.2,5.0,0.0", "0.1,5.0,0.0"])
    with pytest.raises(NonMonotonicTimeError):
        parse_segment(str(path))


def test_parse_segment_too_short(tmp_path):
    path = tmp_path / "h.csv"
    write_csv(path, ["0.0,5.0,0.0"])
    with pytest.raises(TooShortError):
        parse_segment(str(path))


def test_write_then_parse_round_trips_exactly(tmp_path):
    rng = np.random.default_rng(7)
    segment = make_segment(
        speed=rng.uniform(0, 30, 50),
        accel=rng.normal(0, 2, 50),
        jerk=rng.normal(0, 5, 50),
        n=50,
        label=StyleLabel.CONSERVATIVE,
    )
    path = tmp_path / "seg.csv"
    write_segment(segment, str(path))
    loaded = parse_segment(str(path))
    assert np.array_equal(loaded.time, segment.time)
    assert np.array_equal(loaded.speed, segment.speed)
    assert np.array_equal(loaded.accel, segment.accel)
    assert np.array_equal(loaded.jerk, segment.jerk)
    assert loaded.label is StyleLabel.CONSERVATIVE


def test_clean_drops_speed_never_positive():
    good = make_segment("good", speed=np.linspace(1, 5, 10))
    zero = make_segment("zero", speed=np.zeros(10))
    negative = make_segment("neg", speed=np.full(10, -1.0))
    kept, report = clean_segments([good, zero, negative])
    assert [s.segment_id for s in kept] == ["good"]
    assert sorted(report.dropped["speed_never_positive"]) == ["neg", "zero"]
    assert report.total_in == 3
    assert report.total_kept == 1
    assert report.total_dropped == 2


def test_clean_drops_wide_time_gaps():
    segment = make_segment("gap", n=10)
    segment.time = np.array([0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 1.5])
    kept, report = clean_segments([segment])
    assert kept == []
    assert report.dropped["time_gap_too_wide"] == ["gap"]


def test_clean_tolerates_double_gap_exactly():
    segment = make_segment("ok", n=5)
    segment.time = np.array([0.0, 0.1, 0.3, 0.4, 0.5])  # one 2x gap
    kept, _ = clean_segments([segment])
    assert len(kept) == 1


def test_clean_clips_magnitudes():
    segment = make_segment(
        "clip",
        speed=np.array([100.0] + [10.0] * 9),
        accel=np.array([-50.0] + [0.0] * 9),
        jerk=np.array([500.0] + [0.0] * 9),
    )
    kept, _ = clean_segments([segment])
    assert kept[0].speed[0] == 60.0
    assert kept[0].accel[0] == -15.0
    assert kept[0].jerk[0] == 60.0


def test_clean_is_idempotent_at_defaults():
    rng = np.random.default_rng(3)
    segments = [
        make_segment(
            f"s{i}",
            speed=rng.uniform(0.5, 80, 30),
            accel=rng.normal(0, 8, 30),
            jerk=rng.normal(0, 30, 30),
            n=30,
        )
        for i in range(5)
    ]
    once, _ = clean_segments(segments)
    twice, report = clean_segments(once)
    assert report.total_dropped == 0
    for a, b in zip(once, twice):
        assert np.array_equal(a.speed, b.speed)
        assert np.array_equal(a.accel, b.accel)
        assert np.array_equal(a.jerk, b.jerk)


def test_clean_smoothing_applies_centered_average():
    segment = make_segment("s", speed=np.array([1.0, 4.0, 1.0, 4.0, 1.0]), n=5)
    kept, _ = clean_segments([segment], CleanConfig(smooth=True, smooth_window=3))
    assert kept[0].speed == pytest.approx([2.5, 2.0, 3.0, 2.0, 2.5])


def test_load_segments_dir_aborts_on_bad_file_by_default(tmp_path):
    write_csv(tmp_path / "a.csv", ["0.0,5.0,0.0", "0.1,5.0,0.0"])
    write_csv(tmp_path / "b.csv", ["0.0,nan,0.0", "0.1,5.0,0.0"])
    with pytest.raises(NonFiniteValueError):
        load_segments_dir(str(tmp_path))
    segments, skipped = load_segments_dir(str(tmp_path), skip_bad=True)
    assert [s.segment_id for s in segments] == ["a"]
    assert list(skipped) == ["b.csv"]


def test_style_label_codes_are_stable():
    assert [int(v) for v in StyleLabel] == [0, 1, 2, 3]
    assert [v.display for v in StyleLabel] == [
        "Aggressive",
        "Assertive",
        "Conservative",
        "Moderate",
    ]
