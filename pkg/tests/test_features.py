import math
import statistics

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fleetpdm.features import (
    FEATURE_NAMES,
    FeatureConfig,
    FeatureMatrix,
    InsufficientHistory,
    build_matrix,
    days_since_replacement,
    error_counts,
    feature_group,
    feature_names,
    label_row,
    read_matrix,
    rolling_stats,
    write_matrix,
)
from fleetpdm.ingest import KINDS, SENSORS, FleetDataset, assemble
from fleetpdm.synthgen import FleetConfig, generate_fleet


def _close(a, b, rel=1e-9):
    return math.isclose(a, b, rel_tol=rel, abs_tol=1e-12)


# -- config and ledger ----------------------------------------------------------


@pytest.mark.parametrize("kwargs", [
    {"fast_lag_hours": 24},
    {"fast_lag_hours": 0},
    {"sampling_stride_hours": 1.5},
    {"label_horizon_hours": -3},
])
def test_config_rejects(kwargs):
    with pytest.raises(ValueError):
        FeatureConfig(**kwargs)


def test_ledger_count_and_order():
    assert len(FEATURE_NAMES) == 27 == 4 * 2 * 2 + 5 + 4 + 1 + 1
    assert FEATURE_NAMES[:4] == ("mean_fast_volt", "sd_fast_volt", "mean_slow_volt", "sd_slow_volt")
    assert FEATURE_NAMES[16:21] == tuple(f"count_24h_error{i}" for i in range(1, 6))
    assert FEATURE_NAMES[21:25] == tuple(f"days_since_replace_comp{i}" for i in range(1, 5))
    assert FEATURE_NAMES[25:] == ("machine_age", "model_code")
    groups = [feature_group(n) for n in FEATURE_NAMES]
    assert groups.count("sensor-stats") == 16 and groups.count("metadata") == 2


# -- primitives -----------------------------------------------------------------


def test_rolling_stats_examples():
    t = np.arange(10)
    assert rolling_stats(t, np.full(10, 5.0), 9, 3) == (5.0, 0.0)
    assert rolling_stats(t, np.array([0, 0, 0, 0, 0, 0, 0, 1.0, 2.0, 3.0]), 9, 3) == (2.0, 1.0)
    # single observation has sd 0
    assert rolling_stats(t, np.arange(10.0), 0, 3) == (0.0, 0.0)
    with pytest.raises(InsufficientHistory):
        rolling_stats(np.array([20]), np.array([1.0]), 10, 3)
    with pytest.raises(ValueError):
        rolling_stats(t, t, 5, 0)


def test_rolling_stats_brute_force_random_series():
    rng = np.random.default_rng(0)
    times = np.sort(rng.choice(3000, 1000, replace=False))
    vals = rng.normal(100, 15, 1000)
    for w in (3, 24):
        for t in range(int(times[0]), int(times[-1]) + 1, 7):
            win = [v for s, v in zip(times.tolist(), vals.tolist()) if t - w < s <= t]
            if not win:
                continue
            mean, sd = rolling_stats(times, vals, t, w)
            assert _close(mean, statistics.fmean(win))
            assert _close(sd, statistics.stdev(win) if len(win) > 1 else 0.0)


def test_error_counts_examples():
    assert error_counts(np.array([], dtype=int), np.array([], dtype=int), 100) == (0,) * 5
    # t-25 falls outside, t-1 inside, t itself inside
    times, types = np.array([75, 99, 100]), np.array([1, 1, 3])
    assert error_counts(times, types, 100, 24) == (1, 0, 1, 0, 0)
    assert error_counts(times, types, 99, 24) == (1, 0, 0, 0, 0)


def test_days_since_replacement_examples():
    assert days_since_replacement(np.array([120]), np.array([2]), 120, 0)[1] == 0.0
    assert days_since_replacement(np.array([], dtype=int), np.array([], dtype=int), 48, 0) == (2.0,) * 4
    # a replacement after t is ignored
    assert days_since_replacement(np.array([24, 200]), np.array([1, 1]), 72, 0)[0] == 2.0


def test_label_row_edges():
    assert label_row(np.array([124]), 100, 24) == 1
    assert label_row(np.array([100]), 100, 24) == 0
    assert label_row(np.array([125]), 100, 24) == 0
    assert label_row(np.array([], dtype=int), 100, 24) == 0


# -- build_matrix -----------------------------------------------------------------


def test_default_row_count(matrix):
    assert len(matrix) == 7120
    assert abs(len(matrix) - 10 * (2160 - 24) / 3) / len(matrix) < 0.01
    assert matrix.report["rows"] == 7120
    assert matrix.names == FEATURE_NAMES


def test_rows_sorted_and_valid(matrix):
    key = list(zip(matrix.timestamp.tolist(), matrix.machine_id.tolist()))
    assert key == sorted(key)
    assert np.all(np.isfinite(matrix.X))
    sd_cols = [i for i, n in enumerate(matrix.names) if n.startswith("sd_")]
    assert np.all(matrix.X[:, sd_cols] >= 0)
    cnt = matrix.X[:, 16:21]
    assert np.all(cnt >= 0) and np.all(cnt == np.round(cnt))
    assert np.all(matrix.X[:, 21:25] >= 0)


def test_positive_fraction_counting_oracle(fleet, matrix):
    # expected: failure rate times label horizon
    expected = (1 / 4000) * 24
    frac = matrix.y.mean()
    assert expected / 2 <= frac <= expected * 2
    assert matrix.class_counts[1] < matrix.class_counts[0] / 20


def _per_machine(stream, m):
    sel = stream["machine_id"] == m
    return {c: stream[c][sel] for c in stream.columns}


def test_all_rows_match_brute_force(fleet, matrix):
    """Every feature of every row against a direct per-row scan."""
    start = int(fleet.telemetry["timestamp"].min())
    meta = {int(m): (a, c) for m, a, c in zip(fleet.machines["machine_id"], fleet.machines["age"],
                                              fleet.machines["model"])}
    by_m = {m: {k: _per_machine(fleet.streams()[k], m) for k in KINDS[1:]} for m in meta}
    for i in range(len(matrix)):
        t, m = int(matrix.timestamp[i]), int(matrix.machine_id[i])
        row = matrix.X[i]
        tel, err, mnt, fail = (by_m[m][k] for k in KINDS[1:])
        for j, s in enumerate(SENSORS):
            for k, w in enumerate((3, 24)):
                win = tel[s][(tel["timestamp"] > t - w) & (tel["timestamp"] <= t)].tolist()
                assert _close(row[4 * j + 2 * k], statistics.fmean(win))
                assert _close(row[4 * j + 2 * k + 1], statistics.stdev(win) if len(win) > 1 else 0.0)
        in_win = (err["timestamp"] > t - 24) & (err["timestamp"] <= t)
        for e in range(1, 6):
            assert row[15 + e] == int((in_win & (err["error_type"] == e)).sum())
        for c in range(1, 5):
            done = mnt["timestamp"][(mnt["component"] == c) & (mnt["timestamp"] <= t)]
            last = int(done.max()) if done.size else start
            assert row[20 + c] == (t - last) / 24
        assert (row[25], row[26]) == meta[m]
        ft = fail["timestamp"]
        assert matrix.y[i] == int(((ft > t) & (ft <= t + 24)).any())


def _truncate(ds: FleetDataset, t: int) -> FleetDataset:
    streams = []
    for kind in KINDS:
        s = ds.streams()[kind]
        streams.append(s if kind == "machines" else s.take(np.flatnonzero(s["timestamp"] <= t)))
    return assemble(*streams)


@pytest.mark.parametrize("cut", [300, 1000, 2000])
def test_causality_by_truncation(fleet, matrix, cut):
    t = int(fleet.telemetry["timestamp"].min()) + cut
    short = build_matrix(_truncate(fleet, t))
    keep = matrix.timestamp <= t
    assert len(short) == int(keep.sum())
    assert np.array_equal(short.X, matrix.X[keep])


def test_empty_dataset_gives_empty_matrix():
    ds = generate_fleet(FleetConfig(n_machines=0))
    m = build_matrix(ds)
    assert len(m) == 0 and m.names == FEATURE_NAMES and m.X.shape == (0, 27)


def test_telemetry_gap_keeps_rows_with_slow_history():
    ds = generate_fleet(FleetConfig(n_machines=1, horizon_hours=200, seed=5))
    tel = ds.telemetry
    t0 = int(tel["timestamp"].min())
    # drop hours 100..109: fast windows empty for a few ticks, slow windows never empty
    gap = (tel["timestamp"] >= t0 + 100) & (tel["timestamp"] < t0 + 110)
    holed = assemble(ds.machines, tel.take(np.flatnonzero(~gap)), ds.errors, ds.maintenance, ds.failures)
    full, m = build_matrix(ds), build_matrix(holed)
    assert len(m) == len(full)
    assert m.report["dropped"] == 0
    assert np.all(np.isfinite(m.X))
    # a 30h hole empties the slow window of at least one tick
    gap = (tel["timestamp"] >= t0 + 100) & (tel["timestamp"] < t0 + 130)
    holed = assemble(ds.machines, tel.take(np.flatnonzero(~gap)), ds.errors, ds.maintenance, ds.failures)
    m = build_matrix(holed)
    assert m.report["dropped"] > 0
    assert len(m) + m.report["dropped"] == len(full)


def test_deterministic(fleet, matrix):
    assert build_matrix(fleet) == matrix


def test_non_default_label_counts_change_ledger():
    assert len(feature_names(3, 2)) == 16 + 3 + 2 + 2


# -- export ---------------------------------------------------------------------


def test_matrix_csv_round_trip(tmp_path, small_fleet):
    m = build_matrix(small_fleet)
    write_matrix(m, tmp_path / "f.csv")
    lines = (tmp_path / "f.csv").read_text().splitlines()
    assert lines[0].startswith("#") and "6 significant digits" in lines[0]
    assert lines[1].split(",")[2:-1] == list(FEATURE_NAMES)
    back = read_matrix(tmp_path / "f.csv")
    assert np.array_equal(back.y, m.y) and np.array_equal(back.timestamp, m.timestamp)
    assert np.allclose(back.X, m.X, rtol=5e-6, atol=0)
    # formatting is idempotent: a second write is byte-identical
    write_matrix(back, tmp_path / "g.csv")
    assert (tmp_path / "f.csv").read_bytes() == (tmp_path / "g.csv").read_bytes()


def test_read_matrix_rejects_bad_header(tmp_path):
    (tmp_path / "bad.csv").write_text("a,b,c\n1,2,3\n")
    with pytest.raises(ValueError, match="header"):
        read_matrix(tmp_path / "bad.csv")


def test_matrix_shape_checked():
    with pytest.raises(ValueError):
        FeatureMatrix(np.zeros((2, 3)), np.zeros(2, dtype=int), np.zeros(2, dtype=int), np.zeros(2, dtype=int))


# -- properties -----------------------------------------------------------------


@settings(max_examples=40, deadline=None)
@given(
    times=st.lists(st.integers(0, 200), min_size=1, max_size=60, unique=True),
    t=st.integers(0, 220),
    w=st.integers(1, 48),
    seed=st.integers(0, 1000),
)
def test_rolling_stats_property(times, t, w, seed):
    times = np.sort(np.array(times))
    vals = np.random.default_rng(seed).normal(0, 10, len(times))
    win = vals[(times > t - w) & (times <= t)]
    if win.size == 0:
        with pytest.raises(InsufficientHistory):
            rolling_stats(times, vals, t, w)
        return
    mean, sd = rolling_stats(times, vals, t, w)
    assert win.min() - 1e-9 <= mean <= win.max() + 1e-9
    assert sd >= 0
    shifted = rolling_stats(times, vals + 7.0, t, w)
    assert math.isclose(shifted[0], mean + 7.0, rel_tol=1e-9, abs_tol=1e-9)
    assert math.isclose(shifted[1], sd, rel_tol=1e-6, abs_tol=1e-9)


@settings(max_examples=40, deadline=None)
@given(
    events=st.lists(st.tuples(st.integers(0, 100), st.integers(1, 5)), max_size=30),
    t=st.integers(0, 120),
    w=st.integers(1, 48),
)
def test_error_counts_property(events, t, w):
    events.sort()
    times = np.array([e[0] for e in events], dtype=int)
    types = np.array([e[1] for e in events], dtype=int)
    got = error_counts(times, types, t, w)
    assert sum(got) == sum(1 for s, _ in events if t - w < s <= t)
    wider = error_counts(times, types, t, w + 10)
    assert all(a <= b for a, b in zip(got, wider))


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 2**32), stride=st.integers(1, 6))
def test_build_matrix_properties(seed, stride):
    ds = generate_fleet(FleetConfig(n_machines=2, horizon_hours=150, seed=seed))
    m = build_matrix(ds, FeatureConfig(sampling_stride_hours=stride))
    assert m.X.shape[1] == 27
    assert np.all(np.isfinite(m.X))
    assert set(np.unique(m.y).tolist()) <= {0, 1}
    assert np.all(np.diff(m.timestamp) >= 0)
    assert np.all((m.timestamp - int(ds.telemetry["timestamp"].min())) % stride == 0)
