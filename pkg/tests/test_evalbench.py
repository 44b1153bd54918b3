import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fleetpdm.evalbench import (
    SplitSpec,
    compute_metrics,
    rank_features,
    run_benchmark,
    time_slice_split,
    undersample,
)
from fleetpdm.features import FEATURE_NAMES, FeatureMatrix
from fleetpdm.learners import FAMILIES, LearnerSpec


def _toy(n_neg, n_pos, seed=0, p=3):
    """Rows on an hourly timeline with positives spread evenly."""
    rng = np.random.default_rng(seed)
    n = n_neg + n_pos
    y = np.zeros(n, dtype=np.int64)
    y[np.linspace(0, n - 1, n_pos).astype(int)] = 1 if n_pos else 0
    X = rng.normal(0, 1, (n, p)) + y[:, None] * 3.0
    return FeatureMatrix(X, y, np.ones(n, dtype=np.int64), np.arange(n, dtype=np.int64),
                         tuple(f"f{j}" for j in range(p)))


# -- split spec -------------------------------------------------------------------


@pytest.mark.parametrize("fr", [(), (0.0,), (0.5, 1.0), (0.7, 0.6), (0.6, 0.6)])
def test_split_spec_rejects(fr):
    with pytest.raises(ValueError):
        SplitSpec(fr)


def test_split_spec_defaults():
    s = SplitSpec()
    assert s.train_fractions == (0.6, 0.7, 0.8) and s.balance_ratio == 1.0 and s.balance_test


# -- time slices ------------------------------------------------------------------


def test_fraction_splits_row_quantile():
    m = _toy(990, 10)
    sl = time_slice_split(m, 0.6)
    assert len(sl.train) == 600 and len(sl.test) == 400
    assert sl.train.timestamp.max() < sl.test.timestamp.min()
    assert not sl.degenerate


def test_degenerate_slice_flagged():
    m = _toy(990, 10)
    y = np.zeros(1000, dtype=np.int64)
    y[:500:50] = 1
    m = FeatureMatrix(m.X, y, m.machine_id, m.timestamp, m.names)
    sl = time_slice_split(m, 0.99)
    assert sl.degenerate
    assert sl.test.y.sum() == 0


def test_split_keeps_equal_timestamps_together(matrix):
    for f in (0.6, 0.7, 0.8):
        train, test = time_slice_split(matrix, f)
        assert train.timestamp.max() < test.timestamp.min()
        assert len(train) + len(test) == len(matrix)
        assert abs(len(train) / len(matrix) - f) < 0.01


@settings(max_examples=50, deadline=None)
@given(
    ts=st.lists(st.integers(0, 40), min_size=1, max_size=80),
    fraction=st.floats(0.01, 0.99),
)
def test_no_leakage_property(ts, fraction):
    ts = np.sort(np.array(ts))
    n = len(ts)
    m = FeatureMatrix(np.zeros((n, 1)), np.arange(n) % 2, np.arange(n), ts, ("a",))
    train, test = time_slice_split(m, fraction)
    assert len(train) + len(test) == n
    if len(train) and len(test):
        assert train.timestamp.max() < test.timestamp.min()


# -- undersampling ----------------------------------------------------------------


def test_undersample_4000_to_10():
    m = _toy(4000, 10)
    b = undersample(m, 1.0, seed=3)
    assert b.class_counts == {0: 10, 1: 10}
    assert set(np.flatnonzero(m.y).tolist()) <= set(b.timestamp.tolist())
    assert np.all(np.diff(b.timestamp) >= 0)


def test_undersample_fixed_point_and_ratio():
    m = _toy(50, 50)
    b = undersample(m, 1.0, seed=1)
    assert b == m
    r = undersample(_toy(400, 20), 2.5, seed=1)
    assert r.class_counts == {0: 50, 1: 20}
    with pytest.raises(ValueError):
        undersample(_toy(10, 0), 1.0)


def test_undersample_seeded():
    m = _toy(300, 12)
    assert undersample(m, 1.0, seed=9) == undersample(m, 1.0, seed=9)
    assert undersample(m, 1.0, seed=9) != undersample(m, 1.0, seed=10)


@settings(max_examples=50, deadline=None)
@given(n_neg=st.integers(1, 300), n_pos=st.integers(1, 40), seed=st.integers(0, 2**32))
def test_undersample_property(n_neg, n_pos, seed):
    m = _toy(n_neg, n_pos)
    b = undersample(m, 1.0, seed=seed)
    minority = 1 if n_pos <= n_neg else 0
    n_min = min(n_pos, n_neg)
    assert b.class_counts[minority] == n_min
    assert b.class_counts[1 - minority] == n_min
    kept = set(b.timestamp.tolist())
    assert set(np.flatnonzero(m.y == minority).tolist()) <= kept
    assert len(kept) == len(b)


# -- metrics ----------------------------------------------------------------------


def test_metrics_examples():
    m = compute_metrics([1, 0, 0, 0], [1, 1, 0, 0])
    assert (m.recall, m.accuracy, m.precision) == (0.5, 0.75, 1.0)
    assert m.f1 == pytest.approx(2 / 3)
    p = compute_metrics([1, 0, 1], [1, 0, 1])
    assert p.accuracy == 1.0 and p.fp == p.fn == 0


def test_all_negative_predictions_on_imbalanced_data():
    y = np.zeros(4000, dtype=int)
    y[0] = 1
    m = compute_metrics(np.zeros(4000, dtype=int), y)
    assert m.accuracy == pytest.approx(0.99975)
    assert m.recall == 0.0
    assert math.isnan(m.precision) and math.isnan(m.f1)


def test_metrics_errors():
    with pytest.raises(ValueError):
        compute_metrics([1, 0], [1])
    with pytest.raises(ValueError):
        compute_metrics([], [])


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 1), st.integers(0, 1)), min_size=1, max_size=60))
def test_metrics_cross_checks(pairs):
    p = [a for a, _ in pairs]
    t = [b for _, b in pairs]
    m = compute_metrics(p, t)
    assert m.n == len(pairs)
    assert m.accuracy == np.trace(m.confusion) / m.n
    assert m.tp + m.fn == sum(t)
    assert 0 <= m.accuracy <= 1
    assert math.isnan(m.recall) == (sum(t) == 0)


# -- benchmark --------------------------------------------------------------------


def test_pda_only_relative_time_is_one(matrix):
    r = run_benchmark(matrix, [LearnerSpec("pda")], SplitSpec(), repetitions=1)
    assert r["pda"].relative_time == 1.0
    assert r["pda"].slices_used == 3


def test_all_degenerate_raises():
    with pytest.raises(ValueError, match="degenerate"):
        run_benchmark(_toy(100, 1), [LearnerSpec("pda")], SplitSpec((0.5, 0.9)))


def test_bench_structure(default_bench):
    names = [r.name for r in default_bench.ranked()]
    assert sorted(names) == sorted(FAMILIES)
    accs = [r.median_accuracy for r in default_bench.ranked()]
    accs = [a for a in accs if not math.isnan(a)]
    assert accs == sorted(accs, reverse=True)
    for s in default_bench.slices:
        assert not s.degenerate
    for r in default_bench.learners:
        assert r.slices_used + len(r.failures) == 3
        for f, m in r.slice_metrics.items():
            info = next(s for s in default_bench.slices if s.fraction == f)
            assert m.n == info.n_test
            assert m.tp + m.fn == info.n_test // 2
            assert 0 <= m.accuracy <= 1 and 0 <= m.recall <= 1


def test_relative_time_invariants(default_bench):
    rs = default_bench.learners
    assert sum(r.relative_time == 1.0 for r in rs) == 1
    assert all(r.relative_time >= 1.0 for r in rs)
    by_rel = sorted(rs, key=lambda r: r.relative_time)
    by_sec = sorted(rs, key=lambda r: r.median_seconds)
    assert [r.name for r in by_rel] == [r.name for r in by_sec]


def test_lda_failure_is_recorded_not_fatal(default_bench):
    lda = default_bench["lda"]
    for f, msg in lda.failures.items():
        assert f not in lda.slice_metrics
        assert "SingularCovarianceError" in msg


def test_unbalanced_test_side_supported(matrix):
    r = run_benchmark(matrix, [LearnerSpec("pda")], SplitSpec(balance_test=False), repetitions=1)
    assert not r.balance_test
    info = r.slices[0]
    assert info.n_test > 1000
    assert r["pda"].slice_metrics[0.6].n == info.n_test


def test_benchmark_metrics_deterministic(matrix):
    specs = [LearnerSpec("pda"), LearnerSpec("mars")]
    a = run_benchmark(matrix, specs, repetitions=1)
    b = run_benchmark(matrix, specs, repetitions=1)
    for x, y in zip(a.learners, b.learners):
        assert x.slice_metrics == y.slice_metrics


# -- importance -------------------------------------------------------------------


def test_importance_report_shape(default_importance):
    feats = default_importance.features
    assert sorted(f.rank for f in feats) == list(range(1, 28))
    assert {f.name for f in feats} == set(FEATURE_NAMES)
    scores = [f.score for f in feats]
    assert scores == sorted(scores, reverse=True)
    for a, b in zip(feats, feats[1:]):
        if a.score == b.score:
            assert FEATURE_NAMES.index(a.name) < FEATURE_NAMES.index(b.name)
    assert all(f.score == max(f.raw, 0.0) for f in feats)
    assert default_importance.fraction == 0.7


def test_importance_examples(default_importance):
    rep = default_importance
    assert rep.features[0].group == "error-counts"
    g = rep.group_mean_rank()
    assert g["error-counts"] < g["metadata"]
    best_rotate_mean = min(rep.rank_of("mean_fast_rotate"), rep.rank_of("mean_slow_rotate"))
    assert best_rotate_mean < min(rep.rank_of("machine_age"), rep.rank_of("model_code"))


def test_injected_constant_feature_ranks_last(matrix):
    X = np.column_stack([matrix.X, np.full(len(matrix), 7.0)])
    m28 = FeatureMatrix(X, matrix.y, matrix.machine_id, matrix.timestamp, (*matrix.names, "constant"))
    rep = rank_features(m28, LearnerSpec("rf", {"n_trees": 60}, seed=42))
    assert rep.rank_of("constant") == 28
    assert rep.features[-1].group == "other"


def test_rank_features_needs_rf(matrix):
    with pytest.raises(ValueError, match="rf"):
        rank_features(matrix, LearnerSpec("gbm"))


def test_importance_deterministic(matrix, default_importance):
    again = rank_features(matrix, LearnerSpec("rf", seed=42))
    assert again == default_importance
