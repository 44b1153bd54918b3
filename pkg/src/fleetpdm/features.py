"""The 27-column modeling table: lagged sensor statistics, error counts,
component replacement ages and machine metadata, plus a failure-horizon label.

Windows are half-open on the left, ``(t - w, t]``, so every feature of the row
at hour ``t`` depends only on events stamped at or before ``t``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from fleetpdm.ingest import SENSORS, FleetDataset, format_timestamp, parse_timestamp


class InsufficientHistory(ValueError):
    pass


@dataclass(frozen=True)
class FeatureConfig:
    fast_lag_hours: int = 3
    slow_lag_hours: int = 24
    error_window_hours: int = 24
    label_horizon_hours: int = 24
    sampling_stride_hours: int = 3

    def __post_init__(self):
        for k, v in self.__dict__.items():
            if int(v) != v or v < 1:
                raise ValueError(f"{k} must be a positive integer, got {v!r}")
        if self.fast_lag_hours >= self.slow_lag_hours:
            raise ValueError("fast_lag_hours must be < slow_lag_hours")


def feature_names(n_error_types: int = 5, n_components: int = 4) -> tuple[str, ...]:
    names = []
    for s in SENSORS:
        names += [f"mean_fast_{s}", f"sd_fast_{s}", f"mean_slow_{s}", f"sd_slow_{s}"]
    names += [f"count_24h_error{i}" for i in range(1, n_error_types + 1)]
    names += [f"days_since_replace_comp{i}" for i in range(1, n_components + 1)]
    names += ["machine_age", "model_code"]
    return tuple(names)


FEATURE_NAMES = feature_names()

GROUPS = {
    "error-counts": "count_24h_error",
    "sensor-stats": ("mean_", "sd_"),
    "replacement-ages": "days_since_replace",
    "metadata": ("machine_age", "model_code"),
}


def feature_group(name: str) -> str:
    for group, prefix in GROUPS.items():
        if name.startswith(prefix):
            return group
    raise KeyError(name)


@dataclass(frozen=True)
class FeatureRow:
    machine_id: int
    timestamp: int
    values: tuple[float, ...]
    label: int
    names: tuple[str, ...] = FEATURE_NAMES

    def __getitem__(self, name: str) -> float:
        return self.values[self.names.index(name)]


@dataclass(frozen=True, eq=False)
class FeatureMatrix:
    """Rows sorted by (timestamp, machine_id); ``X`` columns follow ``names``."""

    X: np.ndarray
    y: np.ndarray
    machine_id: np.ndarray
    timestamp: np.ndarray
    names: tuple[str, ...] = FEATURE_NAMES
    report: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.X.shape != (len(self.y), len(self.names)):
            raise ValueError(f"X shape {self.X.shape} does not match {len(self.y)} rows x {len(self.names)} names")
        for a in (self.X, self.y, self.machine_id, self.timestamp):
            a.setflags(write=False)

    def __len__(self) -> int:
        return len(self.y)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, FeatureMatrix):
            return NotImplemented
        return self.names == other.names and all(
            np.array_equal(a, b)
            for a, b in (
                (self.X, other.X), (self.y, other.y),
                (self.machine_id, other.machine_id), (self.timestamp, other.timestamp),
            )
        )

    def row(self, i: int) -> FeatureRow:
        return FeatureRow(
            int(self.machine_id[i]), int(self.timestamp[i]),
            tuple(self.X[i].tolist()), int(self.y[i]), self.names,
        )

    def take(self, index) -> "FeatureMatrix":
        index = np.asarray(index)
        return FeatureMatrix(
            self.X[index], self.y[index], self.machine_id[index], self.timestamp[index], self.names
        )

    @property
    def class_counts(self) -> dict[int, int]:
        return {0: int((self.y == 0).sum()), 1: int((self.y == 1).sum())}

    @classmethod
    def empty(cls, names=FEATURE_NAMES) -> "FeatureMatrix":
        return cls(
            np.zeros((0, len(names))), np.zeros(0, dtype=np.int64),
            np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64), tuple(names),
        )


# -- per-window primitives ----------------------------------------------------


def rolling_stats(times, values, t: int, window_hours: int) -> tuple[float, float]:
    """Mean and sample SD of ``values`` stamped in ``(t - window_hours, t]``."""
    if window_hours < 1:
        raise ValueError("window_hours must be >= 1")
    times = np.asarray(times)
    lo = np.searchsorted(times, t - window_hours, side="right")
    hi = np.searchsorted(times, t, side="right")
    w = np.asarray(values[lo:hi], dtype=float)
    if w.size == 0:
        raise InsufficientHistory(f"no observations in ({t - window_hours}, {t}]")
    mean = w.mean()
    sd = 0.0 if w.size == 1 else float(np.sqrt(((w - mean) ** 2).sum() / (w.size - 1)))
    return float(mean), sd


def error_counts(times, types, t: int, window_hours: int = 24, n_error_types: int = 5) -> tuple[int, ...]:
    times = np.asarray(times)
    lo = np.searchsorted(times, t - window_hours, side="right")
    hi = np.searchsorted(times, t, side="right")
    counts = np.bincount(np.asarray(types[lo:hi], dtype=np.int64), minlength=n_error_types + 1)
    return tuple(int(c) for c in counts[1:n_error_types + 1])


def days_since_replacement(times, components, t: int, start: int, n_components: int = 4) -> tuple[float, ...]:
    """Days since the latest replacement at or before ``t``; falls back to ``start``."""
    times = np.asarray(times)
    comps = np.asarray(components)
    hi = np.searchsorted(times, t, side="right")
    out = []
    for c in range(1, n_components + 1):
        hit = np.flatnonzero(comps[:hi] == c)
        last = times[hit[-1]] if hit.size else start
        out.append((t - last) / 24.0)
    return tuple(out)


def label_row(failure_times, t: int, horizon_hours: int = 24) -> int:
    ft = np.asarray(failure_times)
    lo = np.searchsorted(ft, t, side="right")
    hi = np.searchsorted(ft, t + horizon_hours, side="right")
    return int(hi > lo)


# -- vectorized versions used by build_matrix ----------------------------------


def _window_bounds(times: np.ndarray, ticks: np.ndarray, window: int):
    lo = np.searchsorted(times, ticks - window, side="right")
    hi = np.searchsorted(times, ticks, side="right")
    return lo, hi


def _windowed_mean_sd(values: np.ndarray, lo: np.ndarray, hi: np.ndarray):
    """Two-pass mean/SD over ragged windows ``values[lo:hi]`` via a padded gather."""
    n = hi - lo
    width = int(n.max()) if n.size else 0
    if width == 0:
        return np.full(len(lo), np.nan), np.full(len(lo), np.nan)
    idx = lo[:, None] + np.arange(width)[None, :]
    mask = idx < hi[:, None]
    w = np.where(mask, values[np.minimum(idx, len(values) - 1)], 0.0)
    with np.errstate(invalid="ignore", divide="ignore"):
        mean = w.sum(axis=1) / n
        dev = np.where(mask, w - mean[:, None], 0.0)
        var = (dev**2).sum(axis=1) / np.maximum(n - 1, 1)
    var[n == 1] = 0.0
    mean[n == 0] = np.nan
    return mean, np.sqrt(var)


def _machine_block(ds: FleetDataset, m: int, age: int, model: int, cfg: FeatureConfig,
                   start: int, end: int, slices: dict):
    # fleet-wide stride grid anchored at start; first tick with a full slow window
    first = start + -(-(cfg.slow_lag_hours - 1) // cfg.sampling_stride_hours) * cfg.sampling_stride_hours
    ticks = np.arange(first, end + 1, cfg.sampling_stride_hours, dtype=np.int64)

    tsl = slices["telemetry"]
    tt = ds.telemetry["timestamp"][tsl]
    lo_s, hi_s = _window_bounds(tt, ticks, cfg.slow_lag_hours)
    keep = hi_s > lo_s
    dropped = int((~keep).sum())
    ticks, lo_s, hi_s = ticks[keep], lo_s[keep], hi_s[keep]
    lo_f, hi_f = _window_bounds(tt, ticks, cfg.fast_lag_hours)

    cols = []
    for s in SENSORS:
        v = ds.telemetry[s][tsl]
        mf, sf = _windowed_mean_sd(v, lo_f, hi_f)
        ms, ss = _windowed_mean_sd(v, lo_s, hi_s)
        cols += [mf, sf, ms, ss]
    # the fast window can be empty across a gap; reuse the slow statistics then
    empty_fast = hi_f == lo_f
    if empty_fast.any():
        for j in range(len(SENSORS)):
            cols[4 * j][empty_fast] = cols[4 * j + 2][empty_fast]
            cols[4 * j + 1][empty_fast] = 0.0

    esl = slices["errors"]
    et = ds.errors["timestamp"][esl]
    etype = ds.errors["error_type"][esl]
    for k in range(1, ds.n_error_types + 1):
        tk = et[etype == k]
        lo, hi = _window_bounds(tk, ticks, cfg.error_window_hours)
        cols.append((hi - lo).astype(float))

    msl = slices["maintenance"]
    mt = ds.maintenance["timestamp"][msl]
    mc = ds.maintenance["component"][msl]
    for c in range(1, ds.n_components + 1):
        tc = mt[mc == c]
        pos = np.searchsorted(tc, ticks, side="right")
        last = np.where(pos > 0, tc[np.maximum(pos - 1, 0)] if len(tc) else start, start)
        cols.append((ticks - last) / 24.0)

    cols.append(np.full(len(ticks), float(age)))
    cols.append(np.full(len(ticks), float(model)))

    ft = ds.failures["timestamp"][slices["failures"]]
    lo = np.searchsorted(ft, ticks, side="right")
    hi = np.searchsorted(ft, ticks + cfg.label_horizon_hours, side="right")
    y = (hi > lo).astype(np.int64)
    X = np.column_stack(cols) if cols else np.zeros((len(ticks), 0))
    return X, y, ticks, dropped


def _per_machine_slices(stream, ids: np.ndarray) -> dict[int, np.ndarray]:
    """Indices of each machine's rows, in time order."""
    mid = stream["machine_id"]
    order = np.lexsort((stream["timestamp"], mid)) if stream.kind != "machines" else np.argsort(mid)
    sorted_ids = mid[order]
    out = {}
    for m in ids.tolist():
        a, b = np.searchsorted(sorted_ids, m, "left"), np.searchsorted(sorted_ids, m, "right")
        out[m] = order[a:b]
    return out


def build_matrix(dataset: FleetDataset, config: FeatureConfig | None = None) -> FeatureMatrix:
    """One row per machine per stride tick once the slow window has history.

    Ticks sit on a fleet-wide grid anchored at the first telemetry hour; a
    tick is dropped only when its slow window holds no telemetry.
    """
    cfg = config or FeatureConfig()
    names = feature_names(dataset.n_error_types, dataset.n_components)
    if dataset.is_empty:
        m = FeatureMatrix.empty(names)
        return FeatureMatrix(m.X, m.y, m.machine_id, m.timestamp, names, {"rows": 0, "dropped": 0})
    tel_t = dataset.telemetry["timestamp"]
    start, end = int(tel_t.min()), int(tel_t.max())
    ids = dataset.machines["machine_id"]
    per = {k: _per_machine_slices(dataset.streams()[k], ids) for k in
           ("telemetry", "errors", "maintenance", "failures")}

    blocks = []
    dropped = 0
    for i, m in enumerate(ids.tolist()):
        sl = {k: per[k][m] for k in per}
        X, y, ticks, d = _machine_block(
            dataset, m, int(dataset.machines["age"][i]), int(dataset.machines["model"][i]),
            cfg, start, end, sl,
        )
        dropped += d
        blocks.append((X, y, np.full(len(ticks), m, dtype=np.int64), ticks))
    X = np.concatenate([b[0] for b in blocks])
    y = np.concatenate([b[1] for b in blocks])
    mid = np.concatenate([b[2] for b in blocks])
    ts = np.concatenate([b[3] for b in blocks])
    order = np.lexsort((mid, ts))
    report = {"rows": int(len(order)), "dropped": dropped,
              "positives": int(y.sum()), "negatives": int(len(y) - y.sum())}
    return FeatureMatrix(X[order], y[order], mid[order], ts[order], names, report)


# -- export -------------------------------------------------------------------

KEY_COLUMNS = ("datetime", "machineID")


def write_matrix(matrix: FeatureMatrix, path: str | Path) -> None:
    """CSV: key columns, the 27 features in ledger order, then ``label``."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("# fleetpdm feature matrix; feature values formatted %.6g (6 significant digits)\n")
        fh.write(",".join((*KEY_COLUMNS, *matrix.names, "label")) + "\n")
        for i in range(len(matrix)):
            vals = ",".join(f"{v:.6g}" for v in matrix.X[i].tolist())
            fh.write(f"{format_timestamp(int(matrix.timestamp[i]))},{int(matrix.machine_id[i])},{vals},{int(matrix.y[i])}\n")


def read_matrix(path: str | Path) -> FeatureMatrix:
    path = Path(path)
    with open(path, encoding="utf-8") as fh:
        lines = [ln for ln in fh.read().splitlines() if ln and not ln.startswith("#")]
    if not lines:
        raise ValueError(f"{path}: no header row")
    header = lines[0].split(",")
    if tuple(header[:2]) != KEY_COLUMNS or header[-1] != "label":
        raise ValueError(f"{path}: header must be {','.join(KEY_COLUMNS)},<features>,label")
    names = tuple(header[2:-1])
    n = len(lines) - 1
    X = np.empty((n, len(names)))
    y = np.empty(n, dtype=np.int64)
    mid = np.empty(n, dtype=np.int64)
    ts = np.empty(n, dtype=np.int64)
    for i, ln in enumerate(lines[1:]):
        parts = ln.split(",")
        if len(parts) != len(header):
            raise ValueError(f"{path}:{i + 3}: expected {len(header)} fields, got {len(parts)}")
        ts[i] = parse_timestamp(parts[0])
        mid[i] = int(parts[1])
        X[i] = [float(p) for p in parts[2:-1]]
        y[i] = int(parts[-1])
    return FeatureMatrix(X, y, mid, ts, names)
