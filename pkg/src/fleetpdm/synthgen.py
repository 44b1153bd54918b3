"""Seeded synthetic fleet with the event-rate profile of the public PdM dataset.

Every machine draws its randomness from ``SeedSequence(seed, spawn_key=(id,))``
so output is independent of generation order. Failures precede themselves
with a degradation lead window in which precursor errors become frequent and
the rotation sensor sags; nothing else carries failure information.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
from scipy.signal import lfilter

from fleetpdm.ingest import (
    FILENAMES,
    KINDS,
    SENSORS,
    FleetDataset,
    Stream,
    assemble,
    parse_timestamp,
    write_stream,
)

START = "2015-01-01 06:00:00"

SENSOR_BASE = {"volt": 170.0, "rotate": 450.0, "pressure": 100.0, "vibration": 40.0}
SENSOR_SD = {"volt": 15.0, "rotate": 50.0, "pressure": 10.0, "vibration": 5.0}

# SD of per-machine calibration offsets unrelated to model or age, in baseline SDs
MACHINE_OFFSET_SD = {"volt": 1.0, "rotate": 0.4, "pressure": 1.0, "vibration": 1.0}
# share of sensor variance carried by a slow AR(1) drift (the rest is white)
DRIFT_SHARE = 0.9
DRIFT_PHI = 0.995
# rotation sag in the lead window, in baseline SDs: FLOOR + RAMP * wear
ROTATE_SAG_FLOOR = 2.0
ROTATE_SAG_RAMP = 0.0
# white-noise SD multiplier in the lead window (sensors turn erratic before failure)
VOLATILITY_BOOST = 1.65
# error intensity multiplier over the whole lead window
ERROR_BOOST_FLOOR = 5.0
# precursors: BURST_TYPES distinct error types within hours
# [F - BURST_HOURS[1], F - BURST_HOURS[0]] before a failure at F
BURST_HOURS = (22, 26)
BURST_TYPES = 4
# the background rate never drops below this share of error_rate_target
MIN_BASELINE_SHARE = 0.1
# telemetry resolution (decimal places)
SENSOR_DECIMALS = 4


@dataclass(frozen=True)
class FleetConfig:
    n_machines: int = 10
    horizon_hours: int = 2160
    n_components: int = 4
    n_error_types: int = 5
    n_models: int = 4
    failure_rate_target: float = 1 / 4000
    error_rate_target: float = 1 / 1000
    scheduled_maint_interval_days: int = 15
    degradation_lead_hours: int = 72
    seed: int = 42

    def __post_init__(self):
        for name in (
            "n_machines", "horizon_hours", "n_components", "n_error_types",
            "n_models", "scheduled_maint_interval_days", "degradation_lead_hours",
        ):
            v = getattr(self, name)
            if not isinstance(v, (int, np.integer)) or v < 0:
                raise ValueError(f"{name} must be a non-negative integer, got {v!r}")
        if self.n_machines > 0 and min(self.n_components, self.n_error_types, self.n_models) < 1:
            raise ValueError("n_components, n_error_types and n_models must be >= 1")
        if not 0 < self.failure_rate_target <= self.error_rate_target < 1:
            raise ValueError("need 0 < failure_rate_target <= error_rate_target < 1")
        if self.degradation_lead_hours < 24:
            raise ValueError("degradation_lead_hours must be >= 24")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")


@dataclass
class _Failure:
    hour: int
    component: int


def baseline_error_rate(cfg: FleetConfig) -> float:
    """Background error intensity per machine-hour.

    Precursors add ``BURST_TYPES`` errors per failure; the
    background makes up the rest of ``error_rate_target``.
    """
    precursors = cfg.failure_rate_target * min(BURST_TYPES, cfg.n_error_types)
    return max(cfg.error_rate_target - precursors, MIN_BASELINE_SHARE * cfg.error_rate_target)


def _machine_rng(seed: int, machine_id: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(machine_id,)))


def _component_timeline(rng, comp: int, cfg: FleetConfig, sched: list[int]):
    """Failures of one component; scheduled replacements restart its clock.

    Returns (failure hours, scheduled replacement hours actually performed).
    Waiting times are exponential, so restarting at a replacement leaves the
    hourly hazard at ``failure_rate_target / n_components``.
    """
    rate = cfg.failure_rate_target / cfg.n_components
    H = cfg.horizon_hours
    fails, done = [], []
    t = 0
    k = 0
    while True:
        tf = t + max(1, math.ceil(rng.exponential(1.0 / rate)))
        while k < len(sched) and sched[k] <= t:
            k += 1
        ts = sched[k] if k < len(sched) else H
        if tf < min(ts, H):
            fails.append(tf)
            t = tf
        elif ts < H:
            done.append(ts)
            t = ts
        else:
            break
    return fails, done


def _generate_machine(machine_id: int, cfg: FleetConfig, hours: np.ndarray):
    rng = _machine_rng(cfg.seed, machine_id)
    H = cfg.horizon_hours
    model = int(rng.integers(1, cfg.n_models + 1))
    age = int(rng.integers(0, 21))

    # scheduled maintenance: one component per visit, in rotation
    interval = cfg.scheduled_maint_interval_days * 24
    sched: dict[int, list[int]] = {c: [] for c in range(1, cfg.n_components + 1)}
    if interval > 0:
        offset = int(rng.integers(0, interval))
        first_comp = int(rng.integers(0, cfg.n_components))
        for i, h in enumerate(range(offset, H, interval)):
            sched[(first_comp + i) % cfg.n_components + 1].append(h)

    failures: list[_Failure] = []
    maint: list[tuple[int, int]] = []
    for c in range(1, cfg.n_components + 1):
        fails, done = _component_timeline(rng, c, cfg, sched[c])
        failures += [_Failure(h, c) for h in fails]
        maint += [(h, c) for h in fails] + [(h, c) for h in done]

    # wear in [0, 1] over each failure's lead window, summed over overlapping leads
    L = cfg.degradation_lead_hours
    wear = np.zeros(H)
    in_lead = np.zeros(H, dtype=bool)
    for f in failures:
        lo = max(0, f.hour - L)
        idx = np.arange(lo, f.hour)
        wear[idx] += (idx - (f.hour - L) + 1) / L
        in_lead[idx] = True

    offsets = {s: rng.normal(0.0, MACHINE_OFFSET_SD[s] * SENSOR_SD[s]) for s in SENSORS}
    # telemetry: model/age offsets, slow drift, white noise, rotation sag
    tel = {}
    for j, s in enumerate(SENSORS):
        sd = SENSOR_SD[s]
        base = SENSOR_BASE[s] + offsets[s]
        if s == "volt":
            base += 0.1 * sd * (model - (cfg.n_models + 1) / 2)
        elif s == "vibration":
            base += 0.01 * sd * (age - 10)
        drift_sd = sd * math.sqrt(DRIFT_SHARE)
        innov = rng.normal(0.0, drift_sd * math.sqrt(1 - DRIFT_PHI**2), H)
        prev = rng.normal(0.0, drift_sd)
        drift = lfilter([1.0], [1.0, -DRIFT_PHI], innov, zi=[DRIFT_PHI * prev])[0]
        white_sd = sd * math.sqrt(1 - DRIFT_SHARE) * np.where(in_lead, VOLATILITY_BOOST, 1.0)
        x = base + drift + rng.normal(0.0, 1.0, H) * white_sd
        if s == "rotate":
            x -= np.where(in_lead, sd * (ROTATE_SAG_FLOOR + ROTATE_SAG_RAMP * wear), 0.0)
        tel[s] = np.round(x, SENSOR_DECIMALS)

    # errors: per type, at most one event per hour; 5x intensity throughout the lead
    p = baseline_error_rate(cfg) * np.where(in_lead, ERROR_BOOST_FLOOR, 1.0)
    p_type = np.minimum(p / cfg.n_error_types, 1.0)
    hits = rng.random((cfg.n_error_types, H)) < p_type
    # precursors: all but one of the burst types land together at or before
    # F-24 and the last at or after it, so every 24h window ending in the final
    # day before failure sees at least one and most windows see them all
    k = min(BURST_TYPES, cfg.n_error_types)
    for f in failures:
        mid = f.hour - 24
        if mid < 0:
            continue
        lo, hi = max(f.hour - BURST_HOURS[1], 0), f.hour - BURST_HOURS[0]
        types = rng.choice(cfg.n_error_types, k, replace=False)
        early, late = int(rng.integers(lo, mid + 1)), int(rng.integers(mid, hi + 1))
        hits[types[: max(k - 1, 1)], early] = True
        if k > 1:
            hits[types[-1], late] = True
    etype, ehour = np.nonzero(hits)

    return {
        "model": model,
        "age": age,
        "telemetry": tel,
        "errors": (ehour, etype + 1),
        "maintenance": maint,
        "failures": [(f.hour, f.component) for f in failures],
    }


def generate_fleet(config: FleetConfig) -> FleetDataset:
    """Generate the five streams for ``config`` on an hourly grid from :data:`START`."""
    cfg = config
    t0 = parse_timestamp(START)
    H = cfg.horizon_hours
    hours = np.arange(H, dtype=np.int64)

    ids = np.arange(1, cfg.n_machines + 1)
    machines = {"machine_id": ids, "model": [], "age": []}
    tel = {k: [] for k in ("timestamp", "machine_id", *SENSORS)}
    err = {"timestamp": [], "machine_id": [], "error_type": []}
    mnt = {"timestamp": [], "machine_id": [], "component": []}
    fail = {"timestamp": [], "machine_id": [], "component": []}

    for m in ids.tolist():
        g = _generate_machine(m, cfg, hours)
        machines["model"].append(g["model"])
        machines["age"].append(g["age"])
        tel["timestamp"].append(t0 + hours)
        tel["machine_id"].append(np.full(H, m))
        for s in SENSORS:
            tel[s].append(g["telemetry"][s])
        eh, et = g["errors"]
        err["timestamp"].append(t0 + eh)
        err["machine_id"].append(np.full(len(eh), m))
        err["error_type"].append(et)
        for dst, rows in ((mnt, g["maintenance"]), (fail, g["failures"])):
            dst["timestamp"].append(np.array([t0 + h for h, _ in rows], dtype=np.int64))
            dst["machine_id"].append(np.full(len(rows), m))
            dst["component"].append(np.array([c for _, c in rows], dtype=np.int64))

    def cat(d):
        return {k: (np.concatenate(v) if v else np.array([])) for k, v in d.items()}

    return assemble(
        Stream("machines", machines),
        Stream("telemetry", cat(tel)),
        Stream("errors", cat(err)),
        Stream("maintenance", cat(mnt)),
        Stream("failures", cat(fail)),
        n_components=cfg.n_components,
        n_error_types=cfg.n_error_types,
    )


def empirical_rates(dataset: FleetDataset) -> dict[str, float]:
    """Failure and error events per machine-hour of telemetry."""
    mh = len(dataset.telemetry)
    if mh == 0:
        return {"failure_rate": float("nan"), "error_rate": float("nan")}
    return {
        "failure_rate": len(dataset.failures) / mh,
        "error_rate": len(dataset.errors) / mh,
    }


def write_manifest(path: Path, entries: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for k, v in entries.items():
            fh.write(f"{k}={v}\n")


def read_manifest(path: str | Path) -> dict[str, str]:
    out = {}
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if line and not line.startswith("#"):
            k, _, v = line.partition("=")
            out[k.strip()] = v.strip()
    return out


def file_sha256(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def write_fleet(
    dataset: FleetDataset,
    directory: str | Path,
    *,
    config: FleetConfig | None = None,
    overwrite: bool = False,
) -> dict[str, str]:
    """Write the five CSVs plus ``manifest.txt``; returns the manifest entries."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    targets = [directory / FILENAMES[k] for k in KINDS] + [directory / "manifest.txt"]
    if not overwrite:
        existing = [p.name for p in targets if p.exists()]
        if existing:
            raise FileExistsError(f"{directory}: refusing to overwrite {', '.join(existing)}")

    manifest: dict[str, str] = {}
    if config is not None:
        manifest["seed"] = str(config.seed)
        for k, v in asdict(config).items():
            manifest[f"config.{k}"] = repr(v)
    for kind in KINDS:
        n = write_stream(dataset.streams()[kind], directory / FILENAMES[kind])
        manifest[f"rows.{kind}"] = str(n)
    rates = empirical_rates(dataset)
    manifest["empirical.failure_rate"] = repr(rates["failure_rate"])
    manifest["empirical.error_rate"] = repr(rates["error_rate"])
    manifest["empty"] = str(dataset.is_empty).lower()
    for kind in KINDS:
        manifest[f"sha256.{FILENAMES[kind]}"] = file_sha256(directory / FILENAMES[kind])
    write_manifest(directory / "manifest.txt", manifest)
    return manifest
