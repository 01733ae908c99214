"""Feature extraction against independent brute-force oracles."""

import math
import statistics

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from drivestyle.errors import ConfigError, LengthMismatchError
from drivestyle.features import (
    BEHAVIOR_NAMES,
    DEFAULT_SIGNALS,
    DYNAMIC_NAMES,
    EXTENDED_SIGNALS_10,
    EXTENDED_SIGNALS_36,
    STAT_NAMES,
    FeatureExtractor,
    FeatureNormalizer,
    NormStats,
    behavior_features,
    dynamic_features,
    extract_features,
    feature_dimension,
    feature_names,
    lag1_autocorr,
    pearson,
    read_feature_csv,
    resolve_signal,
    stat_features,
    write_feature_csv,
)
from drivestyle.ingest import StyleLabel, TrajectorySegment

# ---------------------------------------------------------------------------
# oracles: naive loop implementations, no numpy vectorization


def oracle_stats(values):
    xs = [float(v) for v in values]
    n = len(xs)
    mean = sum(xs) / n
    m2 = sum((x - mean) ** 2 for x in xs) / n
    m3 = sum((x - mean) ** 3 for x in xs) / n
    m4 = sum((x - mean) ** 4 for x in xs) / n
    if m2 > 0:
        kurtosis = m4 / (m2 * m2) - 3.0
        skewness = m3 / m2**1.5
    else:
        kurtosis = 0.0
        skewness = 0.0

    def percentile(q):
        ordered = sorted(xs)
        pos = (n - 1) * q / 100.0
        lo = math.floor(pos)
        hi = math.ceil(pos)
        if lo == hi:
            return ordered[lo]
        return ordered[lo] + (ordered[hi] - ordered[lo]) * (pos - lo)

    return [
        mean,
        math.sqrt(m2),
        max(xs),
        min(xs),
        percentile(50),
        percentile(25),
        percentile(75),
        kurtosis,
        skewness,
    ]


def oracle_behavior(speed, accel, jerk, tau):
    t = len(accel)
    rho_a = sum(abs(accel[i] - accel[i - 1]) for i in range(1, t)) / (t - 1)
    rho_v = sum(abs(speed[i] - speed[i - 1]) for i in range(1, t)) / (t - 1)
    n_acc = sum(1 for a in accel if a > tau)
    n_brake = sum(1 for a in accel if a < -tau)
    n_turn = sum(1 for j in jerk if abs(j) > tau)
    return [rho_a, float(n_acc), float(n_brake), float(n_turn), rho_v]


def oracle_pearson(xs, ys):
    n = len(xs)
    mx = sum(xs) / n
    my = sum(ys) / n
    sxx = sum((x - mx) ** 2 for x in xs)
    syy = sum((y - my) ** 2 for y in ys)
    if sxx == 0 or syy == 0:
        return 0.0
    sxy = sum((x - mx) * (y - my) for x, y in zip(xs, ys))
    return sxy / math.sqrt(sxx * syy)


def oracle_dynamic(speed, accel, jerk):
    return [
        oracle_pearson(speed, accel),
        oracle_pearson(accel, jerk),
        oracle_pearson(speed[:-1], speed[1:]),
        oracle_pearson(accel[:-1], accel[1:]),
    ]


def random_segment(rng, n=None):
    n = n or int(rng.integers(10, 60))
    return TrajectorySegment(
        segment_id="r",
        time=np.arange(n) * 0.1,
        speed=rng.uniform(0, 30, n),
        accel=rng.normal(0, 2.5, n),
        jerk=rng.normal(0, 6, n),
    )


# ---------------------------------------------------------------------------
# frozen oracle values


def test_stat_features_frozen_case():
    values = stat_features(np.array([1.0, 2.0, 3.0, 4.0]))
    expected = {
        "mean": 2.5,
        "std": 1.118033988749895,
        "max": 4.0,
        "min": 1.0,
        "median": 2.5,
        "q25": 1.75,
        "q75": 3.25,
        "kurtosis": -1.36,
        "skewness": 0.0,
    }
    for name, value in zip(STAT_NAMES, values):
        assert value == pytest.approx(expected[name], abs=1e-12), name


def test_stat_features_constant_series_shape_stats_are_zero():
    values = stat_features(np.full(17, 3.5))
    by_name = dict(zip(STAT_NAMES, values))
    assert by_name["std"] == 0.0
    assert by_name["kurtosis"] == 0.0
    assert by_name["skewness"] == 0.0
    assert by_name["mean"] == 3.5


def test_stat_matches_statistics_module():
    rng = np.random.default_rng(11)
    x = rng.normal(0, 3, 101)
    values = dict(zip(STAT_NAMES, stat_features(x)))
    assert values["mean"] == pytest.approx(statistics.fmean(x), rel=1e-12)
    assert values["std"] == pytest.approx(statistics.pstdev(x), rel=1e-12)
    assert values["median"] == pytest.approx(statistics.median(x), rel=1e-12)


def test_behavior_features_frozen_case():
    accel = np.array([0.0, 3.0, 0.0, -3.0, 0.0])
    speed = np.array([10.0, 10.0, 10.0, 10.0, 10.0])
    jerk = np.zeros(5)
    values = behavior_features(speed, accel, jerk, tau=2.0)
    by_name = dict(zip(BEHAVIOR_NAMES, values))
    assert by_name["acceleration_change_rate"] == pytest.approx(3.0, abs=1e-12)
    assert by_name["num_hard_accelerations"] == 1.0
    assert by_name["num_hard_brakes"] == 1.0
    assert by_name["num_hard_turns"] == 0.0
    assert by_name["speed_change_rate"] == 0.0


def test_behavior_threshold_is_strict():
    accel = np.array([2.0, -2.0, 2.0])  # exactly tau: not events
    jerk = np.array([2.0, -2.0, 2.0])
    speed = np.zeros(3)
    values = dict(zip(BEHAVIOR_NAMES, behavior_features(speed, accel, jerk, tau=2.0)))
    assert values["num_hard_accelerations"] == 0.0
    assert values["num_hard_brakes"] == 0.0
    assert values["num_hard_turns"] == 0.0


def test_pearson_zero_variance_convention():
    assert pearson(np.full(5, 2.0), np.arange(5.0)) == 0.0
    assert pearson(np.arange(5.0), np.full(5, 1.0)) == 0.0
    assert lag1_autocorr(np.full(6, 4.0)) == 0.0


def test_pearson_perfect_correlation():
    x = np.arange(10.0)
    assert pearson(x, 3 * x + 2) == pytest.approx(1.0, abs=1e-12)
    assert pearson(x, -x) == pytest.approx(-1.0, abs=1e-12)


# ---------------------------------------------------------------------------
# oracle equivalence sweeps


def test_full_vector_matches_oracles_on_random_segments():
    rng = np.random.default_rng(202)
    for _ in range(50):
        segment = random_segment(rng)
        fv = extract_features(segment)
        expected = (
            oracle_stats(segment.speed)
            + oracle_stats(segment.accel)
            + oracle_stats(segment.jerk)
            + oracle_behavior(
                list(segment.speed), list(segment.accel), list(segment.jerk), 2.0
            )
            + oracle_dynamic(
                list(segment.speed), list(segment.accel), list(segment.jerk)
            )
        )
        ints = {BEHAVIOR_NAMES[1], BEHAVIOR_NAMES[2], BEHAVIOR_NAMES[3]}
        for name, got, want in zip(fv.names, fv.values, expected):
            if name in ints:
                assert got == want, name
            else:
                assert got == pytest.approx(want, rel=1e-12, abs=1e-12), name


@settings(max_examples=40, deadline=None)
@given(
    accel=st.lists(
        st.floats(-6, 6, allow_nan=False, allow_infinity=False), min_size=2, max_size=40
    ),
    tau=st.floats(0.5, 4.0),
)
def test_event_counts_match_loop_count(accel, tau):
    accel = np.array(accel)
    speed = np.abs(accel) + 1.0
    jerk = accel * 1.5
    values = dict(zip(BEHAVIOR_NAMES, behavior_features(speed, accel, jerk, tau)))
    assert values["num_hard_accelerations"] == sum(1 for a in accel if a > tau)
    assert values["num_hard_brakes"] == sum(1 for a in accel if a < -tau)
    assert values["num_hard_turns"] == sum(1 for j in jerk if abs(j) > tau)


# ---------------------------------------------------------------------------
# dimensions and naming


def test_feature_dimension_formula():
    assert feature_dimension(3) == 36
    assert feature_dimension(10) == 99
    assert feature_dimension(36) == 333


def test_extended_rosters_have_advertised_sizes():
    assert len(EXTENDED_SIGNALS_10) == 10
    assert len(EXTENDED_SIGNALS_36) == 36
    assert len(feature_names(EXTENDED_SIGNALS_10)) == 99
    assert len(feature_names(EXTENDED_SIGNALS_36)) == 333


def test_name_order_anchors():
    names = feature_names(DEFAULT_SIGNALS)
    assert names[0] == "speed_mean"
    assert names[-1] == "acceleration_autocorrelation"
    assert names[9 * 3 : 9 * 3 + 5] == BEHAVIOR_NAMES
    assert names[-4:] == DYNAMIC_NAMES
    assert len(set(names)) == len(names)


def test_extract_features_extended_roster_runs():
    rng = np.random.default_rng(5)
    segment = random_segment(rng, n=40)
    fv = extract_features(segment, signals=EXTENDED_SIGNALS_36)
    assert fv.dim == 333
    assert np.all(np.isfinite(fv.values))


# ---------------------------------------------------------------------------
# derived signals


def test_resolve_signal_operators():
    segment = TrajectorySegment(
        segment_id="s",
        time=np.arange(5) * 0.1,
        speed=np.array([1.0, -2.0, 3.0, -4.0, 5.0]),
        accel=np.array([0.0, 1.0, -1.0, 2.0, -2.0]),
        jerk=np.zeros(5),
    )
    assert resolve_signal("abs:speed", segment) == pytest.approx([1, 2, 3, 4, 5])
    assert resolve_signal("pos:acceleration", segment) == pytest.approx([0, 1, 0, 2, 0])
    assert resolve_signal("neg:acceleration", segment) == pytest.approx(
        [0, 0, -1, 0, -2]
    )
    assert resolve_signal("diff:speed", segment) == pytest.approx([-3, 5, -7, 9, 9])
    assert resolve_signal("abs:diff:speed", segment) == pytest.approx([3, 5, 7, 9, 9])


def test_rolling_signals_match_loop_oracle():
    rng = np.random.default_rng(9)
    segment = random_segment(rng, n=23)
    window = 5
    rolled = resolve_signal(f"rollmean{window}:speed", segment)
    for i in range(len(segment)):
        chunk = segment.speed[max(0, i - window + 1) : i + 1]
        assert rolled[i] == pytest.approx(float(np.mean(chunk)), rel=1e-12)
    rolled_max = resolve_signal(f"rollmax{window}:jerk", segment)
    for i in range(len(segment)):
        chunk = segment.jerk[max(0, i - window + 1) : i + 1]
        assert rolled_max[i] == float(np.max(chunk))


def test_resolve_signal_rejects_unknown():
    segment = random_segment(np.random.default_rng(1), n=5)
    with pytest.raises(ConfigError):
        resolve_signal("velocity", segment)
    with pytest.raises(ConfigError):
        resolve_signal("smooth:speed", segment)
    with pytest.raises(ConfigError):
        resolve_signal("rollmean0:speed", segment)


# ---------------------------------------------------------------------------
# normalization


def test_norm_stats_zero_mean_unit_std():
    rng = np.random.default_rng(21)
    matrix = rng.normal(3, 5, size=(200, 7))
    names = tuple(f"f{i}" for i in range(7))
    stats = NormStats.fit(matrix, names)
    z = stats.apply(matrix)
    assert np.mean(z, axis=0) == pytest.approx(np.zeros(7), abs=1e-12)
    assert np.std(z, axis=0) == pytest.approx(np.ones(7), rel=1e-12)
    assert stats.invert(z) == pytest.approx(matrix, rel=1e-10)


def test_norm_stats_constant_column_maps_to_zero():
    matrix = np.column_stack([np.arange(10.0), np.full(10, 4.0)])
    stats = NormStats.fit(matrix, ("a", "b"))
    z = stats.apply(matrix)
    assert np.all(z[:, 1] == 0.0)
    assert stats.std[1] == 1.0


def test_norm_stats_json_round_trip(tmp_path):
    matrix = np.random.default_rng(2).normal(size=(20, 3))
    stats = NormStats.fit(matrix, ("a", "b", "c"))
    path = tmp_path / "stats.json"
    stats.save(str(path))
    loaded = NormStats.load(str(path))
    assert loaded.names == stats.names
    assert np.array_equal(loaded.mean, stats.mean)
    assert np.array_equal(loaded.std, stats.std)


def test_norm_stats_rejects_wrong_width():
    stats = NormStats.fit(np.zeros((4, 3)), ("a", "b", "c"))
    with pytest.raises(LengthMismatchError):
        stats.apply(np.zeros((4, 5)))


# ---------------------------------------------------------------------------
# transformers and CSV round trip


def test_feature_extractor_transformer():
    rng = np.random.default_rng(31)
    segments = [random_segment(rng, n=30) for _ in range(6)]
    extractor = FeatureExtractor()
    matrix = extractor.fit_transform(segments)
    assert matrix.shape == (6, 36)
    names = list(extractor.get_feature_names_out())
    assert names[0] == "speed_mean"
    single = extract_features(segments[2])
    assert np.array_equal(matrix[2], single.values)


def test_feature_normalizer_sklearn_round_trip():
    rng = np.random.default_rng(32)
    matrix = rng.normal(2, 3, size=(50, 4))
    normalizer = FeatureNormalizer()
    z = normalizer.fit_transform(matrix)
    assert np.mean(z, axis=0) == pytest.approx(np.zeros(4), abs=1e-12)
    back = normalizer.inverse_transform(z)
    assert back == pytest.approx(matrix, rel=1e-10)
    params = normalizer.get_params()
    assert "names" in params


def test_feature_csv_round_trip(tmp_path):
    rng = np.random.default_rng(40)
    matrix = rng.normal(size=(3, 36))
    names = feature_names()
    ids = ["a", "b", "c"]
    labels = [StyleLabel.AGGRESSIVE, None, StyleLabel.MODERATE]
    path = tmp_path / "features.csv"
    write_feature_csv(str(path), ids, labels, matrix, names)
    got_ids, got_labels, got_matrix, got_names = read_feature_csv(str(path))
    assert got_ids == ids
    assert got_labels == labels
    assert got_names == names
    assert np.array_equal(got_matrix, matrix)
