"""Parse, validate and align the five fleet event streams.

The CSV layout follows the public Azure predictive-maintenance dataset
(``datetime, machineID, volt, rotate, ...``) so those files load unchanged.
Streams are held column-wise as numpy arrays; timestamps are integer hours
since the Unix epoch (UTC).
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass
from datetime import datetime, timedelta, timezone
from pathlib import Path
from typing import Iterator

import numpy as np

log = logging.getLogger(__name__)

EPOCH = datetime(1970, 1, 1)

KINDS = ("machines", "telemetry", "errors", "maintenance", "failures")

FILENAMES = {
    "machines": "machines.csv",
    "telemetry": "telemetry.csv",
    "errors": "errors.csv",
    "maintenance": "maint.csv",
    "failures": "failures.csv",
}

# CSV header -> internal column name, in file order
SCHEMAS: dict[str, tuple[tuple[str, str], ...]] = {
    "machines": (("machineID", "machine_id"), ("model", "model"), ("age", "age")),
    "telemetry": (
        ("datetime", "timestamp"),
        ("machineID", "machine_id"),
        ("volt", "volt"),
        ("rotate", "rotate"),
        ("pressure", "pressure"),
        ("vibration", "vibration"),
    ),
    "errors": (("datetime", "timestamp"), ("machineID", "machine_id"), ("errorID", "error_type")),
    "maintenance": (("datetime", "timestamp"), ("machineID", "machine_id"), ("comp", "component")),
    "failures": (("datetime", "timestamp"), ("machineID", "machine_id"), ("failure", "component")),
}

SENSORS = ("volt", "rotate", "pressure", "vibration")

# label columns are stored as 1-based integer codes of "<prefix><n>"
LABEL_PREFIX = {"model": "model", "error_type": "error", "component": "comp"}

FLOAT_COLUMNS = frozenset(SENSORS)


class IngestError(ValueError):
    """Malformed or inconsistent input; ``line`` is 1-based when known."""

    def __init__(self, message: str, *, path: str | Path | None = None, line: int | None = None):
        self.path = None if path is None else str(path)
        self.line = line
        where = ""
        if path is not None:
            where = f"{path}"
            if line is not None:
                where += f":{line}"
            where += ": "
        super().__init__(where + message)


@dataclass(frozen=True)
class MachineRecord:
    machine_id: int
    model: str
    age: int


@dataclass(frozen=True)
class TelemetryRecord:
    timestamp: int
    machine_id: int
    volt: float
    rotate: float
    pressure: float
    vibration: float


@dataclass(frozen=True)
class ErrorRecord:
    timestamp: int
    machine_id: int
    error_type: str


@dataclass(frozen=True)
class MaintenanceRecord:
    timestamp: int
    machine_id: int
    component: str


@dataclass(frozen=True)
class FailureRecord:
    timestamp: int
    machine_id: int
    component: str


RECORD_TYPES = {
    "machines": MachineRecord,
    "telemetry": TelemetryRecord,
    "errors": ErrorRecord,
    "maintenance": MaintenanceRecord,
    "failures": FailureRecord,
}


# -- timestamps ---------------------------------------------------------------

_ts_cache: dict[str, int] = {}
_hour_cache: dict[int, str] = {}


def parse_timestamp(text: str) -> int:
    """Return epoch hours for ``YYYY-MM-DD HH:MM:SS`` (UTC) or ISO 8601 text."""
    hit = _ts_cache.get(text)
    if hit is not None:
        return hit
    s = text.strip()
    if s.endswith("Z"):
        s = s[:-1] + "+00:00"
    try:
        dt = datetime.fromisoformat(s)
    except ValueError:
        raise ValueError(f"malformed timestamp {text!r}") from None
    if dt.tzinfo is not None:
        dt = dt.astimezone(timezone.utc).replace(tzinfo=None)
    if dt.minute or dt.second or dt.microsecond:
        raise ValueError(f"timestamp {text!r} is not on the hourly grid")
    hours = (dt - EPOCH) // timedelta(hours=1)
    if len(_ts_cache) < 1_000_000:
        _ts_cache[text] = hours
    return hours


def format_timestamp(hours: int) -> str:
    hit = _hour_cache.get(hours)
    if hit is None:
        hit = (EPOCH + timedelta(hours=int(hours))).strftime("%Y-%m-%d %H:%M:%S")
        if len(_hour_cache) < 1_000_000:
            _hour_cache[hours] = hit
    return hit


def parse_label(text: str, prefix: str, n_labels: int | None) -> int:
    t = text.strip()
    if not t.startswith(prefix) or not t[len(prefix):].isdigit():
        raise ValueError(f"unknown label {text!r} (expected {prefix}<n>)")
    code = int(t[len(prefix):])
    if code < 1 or (n_labels is not None and code > n_labels):
        raise ValueError(f"unknown label {text!r} (declared {prefix}1..{prefix}{n_labels})")
    return code


# -- streams ------------------------------------------------------------------


class Stream:
    """Column-oriented, immutable event stream of one ``kind``."""

    def __init__(self, kind: str, columns: dict[str, np.ndarray]):
        if kind not in SCHEMAS:
            raise ValueError(f"unknown stream kind {kind!r}")
        names = [c for _, c in SCHEMAS[kind]]
        if set(columns) != set(names):
            raise ValueError(f"{kind} stream needs columns {names}, got {sorted(columns)}")
        cols = {}
        n = None
        for name in names:
            dtype = np.float64 if name in FLOAT_COLUMNS else np.int64
            arr = np.array(columns[name], dtype=dtype)
            arr.setflags(write=False)
            if n is not None and arr.shape != (n,):
                raise ValueError(f"{kind} column {name} has length {arr.shape}, expected {n}")
            n = arr.shape[0]
            cols[name] = arr
        self.kind = kind
        self.columns = cols

    @classmethod
    def empty(cls, kind: str) -> "Stream":
        return cls(kind, {c: [] for _, c in SCHEMAS[kind]})

    def __len__(self) -> int:
        return len(next(iter(self.columns.values())))

    def __getitem__(self, name: str) -> np.ndarray:
        return self.columns[name]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Stream):
            return NotImplemented
        return self.kind == other.kind and all(
            np.array_equal(self.columns[k], other.columns[k]) for k in self.columns
        )

    def __repr__(self) -> str:
        return f"Stream({self.kind!r}, rows={len(self)})"

    def take(self, index: np.ndarray) -> "Stream":
        return Stream(self.kind, {k: v[index] for k, v in self.columns.items()})

    def record(self, i: int):
        values = {}
        for name, arr in self.columns.items():
            v = arr[i].item()
            if name in LABEL_PREFIX:
                v = f"{LABEL_PREFIX[name]}{v}"
            values[name] = v
        return RECORD_TYPES[self.kind](**values)

    def records(self) -> Iterator:
        for i in range(len(self)):
            yield self.record(i)

    @classmethod
    def from_records(cls, kind: str, records) -> "Stream":
        names = [c for _, c in SCHEMAS[kind]]
        cols: dict[str, list] = {c: [] for c in names}
        for r in records:
            for c in names:
                v = getattr(r, c)
                if c in LABEL_PREFIX:
                    v = parse_label(v, LABEL_PREFIX[c], None)
                cols[c].append(v)
        return cls(kind, cols)


@dataclass(frozen=True, eq=False)
class FleetDataset:
    machines: Stream
    telemetry: Stream
    errors: Stream
    maintenance: Stream
    failures: Stream
    n_components: int = 4
    n_error_types: int = 5

    def streams(self) -> dict[str, Stream]:
        return {k: getattr(self, k) for k in KINDS}

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, FleetDataset):
            return NotImplemented
        return (
            self.n_components == other.n_components
            and self.n_error_types == other.n_error_types
            and all(a == b for a, b in zip(self.streams().values(), other.streams().values()))
        )

    def row_counts(self) -> dict[str, int]:
        return {k: len(s) for k, s in self.streams().items()}

    @property
    def is_empty(self) -> bool:
        return len(self.telemetry) == 0


# -- parsing ------------------------------------------------------------------


def parse_stream(
    path: str | Path,
    kind: str,
    *,
    strict: bool = True,
    n_components: int = 4,
    n_error_types: int = 5,
    n_models: int | None = None,
) -> Stream:
    """Parse one CSV file into a :class:`Stream`, preserving row order.

    In strict mode the first bad row raises :class:`IngestError` with its line
    number; otherwise bad rows are logged and skipped.
    """
    if kind not in SCHEMAS:
        raise ValueError(f"unknown stream kind {kind!r}")
    path = Path(path)
    if not path.exists():
        raise IngestError(f"missing {kind} file", path=path)
    n_labels = {"model": n_models, "error_type": n_error_types, "component": n_components}
    schema = SCHEMAS[kind]
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise IngestError("empty file, header row required", path=path, line=1) from None
        header = [h.strip() for h in header]
        if header and header[0].startswith("﻿"):
            header[0] = header[0][1:]
        missing = [h for h, _ in schema if h not in header]
        if missing:
            raise IngestError(f"missing column(s) {missing}", path=path, line=1)
        pos = [header.index(h) for h, _ in schema]
        width = len(header)

        converters = []
        for _, name in schema:
            if name == "timestamp":
                converters.append(parse_timestamp)
            elif name in FLOAT_COLUMNS:
                converters.append(_parse_finite)
            elif name in LABEL_PREFIX:
                prefix, n = LABEL_PREFIX[name], n_labels[name]
                converters.append(lambda t, p=prefix, n=n: parse_label(t, p, n))
            elif name == "machine_id":
                converters.append(_parse_positive_int)
            else:
                converters.append(_parse_nonneg_int)

        out: list[list] = [[] for _ in schema]
        skipped = 0
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                if len(row) != width:
                    raise ValueError(f"expected {width} fields, got {len(row)}")
                vals = [conv(row[p]) for conv, p in zip(converters, pos)]
            except ValueError as exc:
                if strict:
                    raise IngestError(str(exc), path=path, line=lineno) from None
                log.warning("%s:%d: skipped: %s", path, lineno, exc)
                skipped += 1
                continue
            for col, v in zip(out, vals):
                col.append(v)
    if skipped:
        log.warning("%s: skipped %d malformed row(s)", path, skipped)
    return Stream(kind, {name: col for (_, name), col in zip(schema, out)})


def _parse_finite(text: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise ValueError(f"non-numeric sensor value {text!r}") from None
    if not np.isfinite(v):
        raise ValueError(f"non-finite sensor value {text!r}")
    return v


def _parse_positive_int(text: str) -> int:
    v = _parse_nonneg_int(text)
    if v < 1:
        raise ValueError(f"machine id must be positive, got {text!r}")
    return v


def _parse_nonneg_int(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise ValueError(f"expected an integer, got {text!r}") from None
    if v < 0:
        raise ValueError(f"expected a non-negative integer, got {text!r}")
    return v


# -- assembly -----------------------------------------------------------------


def _sort_key(stream: Stream) -> np.ndarray:
    if stream.kind == "machines":
        return np.argsort(stream["machine_id"], kind="stable")
    # lexsort's primary key is the last one
    keys = [stream["machine_id"], stream["timestamp"]]
    for extra in ("error_type", "component"):
        if extra in stream.columns:
            keys.insert(0, stream[extra])
    return np.lexsort(keys)


def assemble(
    machines: Stream,
    telemetry: Stream,
    errors: Stream,
    maintenance: Stream,
    failures: Stream,
    *,
    n_components: int = 4,
    n_error_types: int = 5,
) -> FleetDataset:
    """Sort every stream by (timestamp, machine_id) and check referential integrity."""
    given = dict(zip(KINDS, (machines, telemetry, errors, maintenance, failures)))
    for kind, s in given.items():
        if s.kind != kind:
            raise IngestError(f"expected a {kind} stream, got {s.kind}")
    streams = {k: s.take(_sort_key(s)) for k, s in given.items()}

    ids = streams["machines"]["machine_id"]
    if len(np.unique(ids)) != len(ids):
        dup = ids[1:][np.diff(ids) == 0]
        raise IngestError(f"duplicate machine_id {int(dup[0])} in machines stream")
    for kind in KINDS[1:]:
        ref = streams[kind]["machine_id"]
        orphan = ~np.isin(ref, ids)
        if orphan.any():
            raise IngestError(
                f"{kind} stream references machine_id {int(ref[orphan][0])} absent from machines"
            )
    for kind, col, n in (
        ("errors", "error_type", n_error_types),
        ("maintenance", "component", n_components),
        ("failures", "component", n_components),
    ):
        codes = streams[kind][col]
        if codes.size and (codes.min() < 1 or codes.max() > n):
            raise IngestError(f"{kind} stream has a {col} label outside 1..{n}")

    tel = streams["telemetry"]
    if len(tel) > 1:
        same = (np.diff(tel["timestamp"]) == 0) & (np.diff(tel["machine_id"]) == 0)
        if same.any():
            i = int(np.flatnonzero(same)[0])
            raise IngestError(
                "duplicate telemetry key "
                f"({format_timestamp(int(tel['timestamp'][i]))}, machine {int(tel['machine_id'][i])})"
            )
    return FleetDataset(**streams, n_components=n_components, n_error_types=n_error_types)


def load_fleet(
    directory: str | Path,
    *,
    strict: bool = True,
    n_components: int = 4,
    n_error_types: int = 5,
) -> FleetDataset:
    directory = Path(directory)
    for kind in KINDS:
        p = directory / FILENAMES[kind]
        if not p.exists():
            raise IngestError(f"missing {kind} file {FILENAMES[kind]}", path=p)
    streams = [
        parse_stream(
            directory / FILENAMES[k], k, strict=strict,
            n_components=n_components, n_error_types=n_error_types,
        )
        for k in KINDS
    ]
    return assemble(*streams, n_components=n_components, n_error_types=n_error_types)


# -- writing ------------------------------------------------------------------


def _format_value(name: str, v) -> str:
    if name == "timestamp":
        return format_timestamp(int(v))
    if name in LABEL_PREFIX:
        return f"{LABEL_PREFIX[name]}{int(v)}"
    if name in FLOAT_COLUMNS:
        return repr(float(v))
    return str(int(v))


def write_stream(stream: Stream, path: str | Path) -> int:
    """Write ``stream`` as CSV in its public schema; floats use shortest round-trip repr."""
    schema = SCHEMAS[stream.kind]
    cols = [stream[name].tolist() for _, name in schema]
    names = [name for _, name in schema]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(",".join(h for h, _ in schema) + "\n")
        for row in zip(*cols):
            fh.write(",".join(_format_value(n, v) for n, v in zip(names, row)) + "\n")
    return len(stream)
