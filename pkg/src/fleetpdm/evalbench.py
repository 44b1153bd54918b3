"""Time-sliced, class-balanced benchmark of the learner families.

Timing protocol: learners run one after another on a single worker, each
fit+predict repeated three times, and the median repetition is reported.
Medians across slices skip degenerate slices (a class missing on either side).
"""

from __future__ import annotations

import gc
import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np

from fleetpdm.features import FeatureMatrix, feature_group
from fleetpdm.learners import LearnerSpec, fit, permutation_importance, predict_labels

log = logging.getLogger(__name__)

REPETITIONS = 3


@dataclass(frozen=True)
class SplitSpec:
    train_fractions: tuple[float, ...] = (0.60, 0.70, 0.80)
    balance_ratio: float = 1.0
    balance_test: bool = True
    seed: int = 42

    def __post_init__(self):
        fr = tuple(float(f) for f in self.train_fractions)
        object.__setattr__(self, "train_fractions", fr)
        if not fr or any(not 0 < f < 1 for f in fr) or any(a >= b for a, b in zip(fr, fr[1:])):
            raise ValueError("train_fractions must lie strictly in (0, 1) and ascend")
        if self.balance_ratio <= 0:
            raise ValueError("balance_ratio must be > 0")


@dataclass(frozen=True)
class TimeSlice:
    train: FeatureMatrix
    test: FeatureMatrix
    fraction: float
    cut: int
    degenerate: bool

    def __iter__(self):
        yield self.train
        yield self.test


def _has_both(m: FeatureMatrix) -> bool:
    return len(m) > 0 and 0 < int(m.y.sum()) < len(m)


def time_slice_split(matrix: FeatureMatrix, fraction: float) -> TimeSlice:
    """Train on rows stamped at or before the ``fraction`` row quantile of time."""
    if not 0 < fraction < 1:
        raise ValueError("fraction must lie in (0, 1)")
    ts = matrix.timestamp
    if len(ts) == 0:
        return TimeSlice(matrix, matrix, fraction, 0, True)
    if np.any(np.diff(ts) < 0):
        raise ValueError("matrix rows must be sorted by timestamp")
    idx = min(max(math.ceil(fraction * len(ts)) - 1, 0), len(ts) - 1)
    cut = int(ts[idx])
    n_train = int(np.searchsorted(ts, cut, side="right"))
    train = matrix.take(np.arange(n_train))
    test = matrix.take(np.arange(n_train, len(ts)))
    degenerate = not (_has_both(train) and _has_both(test))
    if degenerate:
        log.warning("slice at fraction %.2f is degenerate (a class is missing on one side)", fraction)
    return TimeSlice(train, test, fraction, cut, degenerate)


def undersample(matrix: FeatureMatrix, ratio: float = 1.0, seed=0) -> FeatureMatrix:
    """Keep every minority row and ``round(ratio * n_minority)`` random majority rows."""
    y = matrix.y
    n1 = int(y.sum())
    n0 = len(y) - n1
    if n0 == 0 or n1 == 0:
        raise ValueError("undersampling needs both classes present")
    minority = 1 if n1 <= n0 else 0
    min_idx = np.flatnonzero(y == minority)
    maj_idx = np.flatnonzero(y != minority)
    want = min(int(round(ratio * len(min_idx))), len(maj_idx))
    rng = np.random.default_rng(seed)
    chosen = rng.choice(maj_idx, size=want, replace=False)
    keep = np.concatenate([min_idx, chosen])
    keep = keep[np.lexsort((matrix.machine_id[keep], matrix.timestamp[keep]))]
    return matrix.take(keep)


@dataclass(frozen=True)
class Metrics:
    tp: int
    fp: int
    tn: int
    fn: int
    accuracy: float
    recall: float
    precision: float
    f1: float

    @property
    def confusion(self) -> np.ndarray:
        """Rows are true class (0, 1), columns predicted class."""
        return np.array([[self.tn, self.fp], [self.fn, self.tp]])

    @property
    def n(self) -> int:
        return self.tp + self.fp + self.tn + self.fn


def _ratio(a, b) -> float:
    return a / b if b else math.nan


def compute_metrics(predictions, labels) -> Metrics:
    """Confusion counts and scores; a zero denominator yields NaN ("undefined")."""
    p = np.asarray(predictions).astype(np.int64)
    t = np.asarray(labels).astype(np.int64)
    if p.shape != t.shape:
        raise ValueError(f"length mismatch: {p.shape} predictions vs {t.shape} labels")
    if p.size == 0:
        raise ValueError("no predictions")
    tp = int(((p == 1) & (t == 1)).sum())
    tn = int(((p == 0) & (t == 0)).sum())
    fp = int(((p == 1) & (t == 0)).sum())
    fn = int(((p == 0) & (t == 1)).sum())
    recall = _ratio(tp, tp + fn)
    precision = _ratio(tp, tp + fp)
    if math.isnan(recall) or math.isnan(precision) or recall + precision == 0:
        f1 = math.nan
    else:
        f1 = 2 * precision * recall / (precision + recall)
    return Metrics(tp, fp, tn, fn, (tp + tn) / p.size, recall, precision, f1)


@dataclass
class LearnerResult:
    name: str
    spec: LearnerSpec
    slice_metrics: dict[float, Metrics] = field(default_factory=dict)
    slice_seconds: dict[float, float] = field(default_factory=dict)
    failures: dict[float, str] = field(default_factory=dict)
    relative_time: float = math.nan

    @property
    def slices_used(self) -> int:
        return len(self.slice_metrics)

    def _median(self, attr: str) -> float:
        vals = [getattr(m, attr) for m in self.slice_metrics.values()]
        vals = [v for v in vals if not math.isnan(v)]
        return float(np.median(vals)) if vals else math.nan

    @property
    def median_accuracy(self) -> float:
        return self._median("accuracy")

    @property
    def median_recall(self) -> float:
        return self._median("recall")

    @property
    def median_precision(self) -> float:
        return self._median("precision")

    @property
    def median_f1(self) -> float:
        return self._median("f1")

    @property
    def median_seconds(self) -> float:
        v = list(self.slice_seconds.values())
        return float(np.median(v)) if v else math.nan


@dataclass
class SliceInfo:
    fraction: float
    cut: int
    n_train: int
    n_test: int
    degenerate: bool


@dataclass
class BenchResult:
    learners: list[LearnerResult]
    slices: list[SliceInfo]
    balance_test: bool

    def ranked(self) -> list[LearnerResult]:
        """Learners by median accuracy, best first; ties by name."""
        def key(r):
            acc = r.median_accuracy
            return (math.isnan(acc), -acc if not math.isnan(acc) else 0.0, r.name)
        return sorted(self.learners, key=key)

    def __getitem__(self, name: str) -> LearnerResult:
        for r in self.learners:
            if r.name == name:
                return r
        raise KeyError(name)


def _slice_seeds(seed: int, i: int):
    return (np.random.SeedSequence(seed, spawn_key=(i, 0)), np.random.SeedSequence(seed, spawn_key=(i, 1)))


def prepare_slice(matrix: FeatureMatrix, split: SplitSpec, i: int):
    """Split at ``train_fractions[i]`` and balance; returns (TimeSlice, train, test)."""
    sl = time_slice_split(matrix, split.train_fractions[i])
    if sl.degenerate:
        return sl, None, None
    s_train, s_test = _slice_seeds(split.seed, i)
    train = undersample(sl.train, split.balance_ratio, s_train)
    test = undersample(sl.test, split.balance_ratio, s_test) if split.balance_test else sl.test
    return sl, train, test


def _learner_names(specs) -> list[str]:
    seen: dict[str, int] = {}
    names = []
    for s in specs:
        seen[s.family] = seen.get(s.family, 0) + 1
        names.append(s.family if seen[s.family] == 1 else f"{s.family}#{seen[s.family]}")
    return names


def run_benchmark(matrix: FeatureMatrix, specs: list[LearnerSpec], split: SplitSpec | None = None,
                  repetitions: int = REPETITIONS) -> BenchResult:
    split = split or SplitSpec()
    if not specs:
        raise ValueError("need at least one learner")
    results = [LearnerResult(n, s) for n, s in zip(_learner_names(specs), specs)]
    slices = []
    for i, frac in enumerate(split.train_fractions):
        sl, train, test = prepare_slice(matrix, split, i)
        slices.append(SliceInfo(frac, sl.cut, 0 if train is None else len(train),
                                0 if test is None else len(test), sl.degenerate))
        if sl.degenerate:
            continue
        for res in results:
            times = []
            pred = None
            try:
                for _ in range(repetitions):
                    gc.collect()
                    t0 = time.perf_counter()
                    model = fit(res.spec, train)
                    pred = predict_labels(model, test.X)
                    times.append(time.perf_counter() - t0)
            except Exception as exc:  # a learner failing on one slice must not sink the run
                log.warning("%s failed on slice %.2f: %s", res.name, frac, exc)
                res.failures[frac] = f"{type(exc).__name__}: {exc}"
                continue
            res.slice_metrics[frac] = compute_metrics(pred, test.y)
            res.slice_seconds[frac] = float(np.median(times))
    if all(s.degenerate for s in slices):
        raise ValueError("every time slice is degenerate; no benchmark possible")
    timed = [r.median_seconds for r in results if not math.isnan(r.median_seconds)]
    fastest = min(timed) if timed else math.nan
    for r in results:
        r.relative_time = r.median_seconds / fastest if timed else math.nan
    return BenchResult(results, slices, split.balance_test)


@dataclass(frozen=True)
class FeatureScore:
    name: str
    score: float  # raw OOB accuracy drop floored at 0
    rank: int
    group: str
    raw: float = 0.0


@dataclass(frozen=True)
class ImportanceReport:
    features: tuple[FeatureScore, ...]
    fraction: float
    n_train: int

    def rank_of(self, name: str) -> int:
        for f in self.features:
            if f.name == name:
                return f.rank
        raise KeyError(name)

    def group_mean_rank(self) -> dict[str, float]:
        groups: dict[str, list[int]] = {}
        for f in self.features:
            groups.setdefault(f.group, []).append(f.rank)
        return {g: float(np.mean(r)) for g, r in groups.items()}


def _group(name: str) -> str:
    try:
        return feature_group(name)
    except KeyError:
        return "other"


def rank_features(matrix: FeatureMatrix, rf_spec: LearnerSpec | None = None,
                  split: SplitSpec | None = None) -> ImportanceReport:
    """Random-forest OOB permutation importance on the balanced middle train slice.

    Ranks sort by score descending, ties by ledger order.
    """
    rf_spec = rf_spec or LearnerSpec("rf", seed=42)
    if rf_spec.family != "rf":
        raise ValueError("rank_features needs an rf learner spec")
    split = split or SplitSpec()
    mid = len(split.train_fractions) // 2
    sl, train, _ = prepare_slice(matrix, split, mid)
    if train is None:
        raise ValueError(f"train slice at fraction {split.train_fractions[mid]} is degenerate")
    model = fit(rf_spec, train)
    raw = permutation_importance(model, train, seed=rf_spec.seed)
    # a negative drop is permutation noise, not anti-information
    scores = np.maximum(raw, 0.0)
    order = sorted(range(len(scores)), key=lambda j: (-scores[j], j))
    feats = tuple(
        FeatureScore(train.names[j], float(scores[j]), r + 1, _group(train.names[j]), float(raw[j]))
        for r, j in enumerate(order)
    )
    return ImportanceReport(feats, split.train_fractions[mid], len(train))
