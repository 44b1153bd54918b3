"""Flat ``key=value`` run configuration.

Every key, its default and its meaning live in ``DEFAULTS``; a config file
may set any subset, and command-line flags override the file.  One ``seed``
drives the fleet, the time-slice balancing and every learner.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

# key: (default, description)
DEFAULTS: dict[str, tuple[str, str]] = {
    "seed": ("42", "master seed for generation, balancing and learners"),
    # fleet
    "n_machines": ("10", "machines in the synthetic fleet"),
    "horizon_hours": ("2160", "hourly telemetry rows per machine"),
    "n_components": ("4", "replaceable components per machine"),
    "n_error_types": ("5", "distinct non-fatal error codes"),
    "n_models": ("4", "machine model codes"),
    "failure_rate_target": ("0.00025", "failures per machine-hour"),
    "error_rate_target": ("0.001", "errors per machine-hour"),
    "scheduled_maint_interval_days": ("15", "days between scheduled replacements"),
    "degradation_lead_hours": ("72", "hours of precursor signal before a failure"),
    # features
    "fast_lag_hours": ("3", "short rolling window"),
    "slow_lag_hours": ("24", "long rolling window"),
    "error_window_hours": ("24", "trailing window for error counts"),
    "label_horizon_hours": ("24", "a row is positive if a failure falls in (t, t+h]"),
    "sampling_stride_hours": ("3", "hours between feature rows"),
    # ingest
    "strict_ingest": ("true", "abort on the first malformed CSV line"),
    # evaluation
    "train_fractions": ("0.6,0.7,0.8", "time-slice cut points (row quantiles)"),
    "balance_ratio": ("1.0", "majority:minority ratio after undersampling"),
    "balance_test": ("true", "undersample the test side too"),
    "repetitions": ("3", "timed fit+predict repetitions per slice (median kept)"),
    "learners": ("lda,pda,mda,mars,gbm,rf", "benchmarked learner families"),
    # learner hyperparameters
    "pda.lam": ("1.0", "ridge penalty on the standardized within-class covariance"),
    "mda.subclasses": ("3", "Gaussian subclasses per class"),
    "mda.em_max_iter": ("100", "EM iteration cap"),
    "mda.em_rel_tol": ("1e-6", "EM relative log-likelihood tolerance"),
    "mars.max_terms": ("21", "basis terms after the forward pass, intercept included"),
    "mars.gcv_penalty": ("3.0", "GCV cost per knot"),
    "mars.degree": ("1", "maximum interaction degree"),
    "gbm.n_trees": ("100", "boosting stages"),
    "gbm.max_depth": ("3", "tree depth"),
    "gbm.shrinkage": ("0.1", "learning rate"),
    "gbm.min_leaf": ("5", "minimum rows per leaf"),
    "rf.n_trees": ("200", "trees in the forest"),
    "rf.mtry": ("5", "features tried per split"),
    "rf.min_leaf": ("5", "minimum rows per leaf"),
}


class ConfigError(ValueError):
    pass


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {text!r}")


def parse_config_text(text: str, source: str = "<config>") -> dict[str, str]:
    """Parse ``key=value`` lines; ``#`` starts a comment, blank lines are skipped."""
    out: dict[str, str] = {}
    for n, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key = key.strip()
        if not sep:
            raise ConfigError(f"{source}:{n}: expected key=value, got {line!r}")
        if key not in DEFAULTS:
            raise ConfigError(f"{source}:{n}: unknown key {key!r}")
        out[key] = value.strip()
    return out


def read_config_file(path: str | Path) -> dict[str, str]:
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {p}: {exc.strerror}") from None
    return parse_config_text(text, str(p))


@dataclass(frozen=True)
class RunConfig:
    """Resolved flat settings; build module configs with the ``*_config`` helpers."""

    values: tuple[tuple[str, str], ...]

    @classmethod
    def from_flat(cls, overrides: dict[str, str] | None = None) -> "RunConfig":
        overrides = overrides or {}
        unknown = set(overrides) - set(DEFAULTS)
        if unknown:
            raise ConfigError(f"unknown key(s) {sorted(unknown)}")
        vals = {k: str(overrides.get(k, d)).strip() for k, (d, _) in DEFAULTS.items()}
        cfg = cls(tuple(vals.items()))
        # build everything once so bad values fail here, not mid-run
        try:
            cfg.fleet_config()
            cfg.feature_config()
            cfg.split_spec()
            cfg.learner_specs()
            cfg.rf_spec()
            if cfg.get_int("repetitions") < 1:
                raise ValueError("repetitions must be >= 1")
            cfg.get_bool("strict_ingest")
        except ConfigError:
            raise
        except (ValueError, TypeError) as exc:
            raise ConfigError(str(exc)) from None
        return cfg

    def as_dict(self) -> dict[str, str]:
        return dict(self.values)

    def get(self, key: str) -> str:
        return self.as_dict()[key]

    def get_int(self, key: str) -> int:
        v = self.get(key)
        try:
            f = float(v)
        except ValueError:
            raise ConfigError(f"{key}: not a number: {v!r}") from None
        if f != int(f):
            raise ConfigError(f"{key}: not an integer: {v!r}")
        return int(f)

    def get_float(self, key: str) -> float:
        v = self.get(key)
        try:
            return float(v)
        except ValueError:
            raise ConfigError(f"{key}: not a number: {v!r}") from None

    def get_bool(self, key: str) -> bool:
        try:
            return _bool(self.get(key))
        except ConfigError as exc:
            raise ConfigError(f"{key}: {exc}") from None

    @property
    def seed(self) -> int:
        return self.get_int("seed")

    def fleet_config(self):
        from fleetpdm.synthgen import FleetConfig

        return FleetConfig(
            n_machines=self.get_int("n_machines"),
            horizon_hours=self.get_int("horizon_hours"),
            n_components=self.get_int("n_components"),
            n_error_types=self.get_int("n_error_types"),
            n_models=self.get_int("n_models"),
            failure_rate_target=self.get_float("failure_rate_target"),
            error_rate_target=self.get_float("error_rate_target"),
            scheduled_maint_interval_days=self.get_int("scheduled_maint_interval_days"),
            degradation_lead_hours=self.get_int("degradation_lead_hours"),
            seed=self.seed,
        )

    def feature_config(self):
        from fleetpdm.features import FeatureConfig

        return FeatureConfig(
            fast_lag_hours=self.get_int("fast_lag_hours"),
            slow_lag_hours=self.get_int("slow_lag_hours"),
            error_window_hours=self.get_int("error_window_hours"),
            label_horizon_hours=self.get_int("label_horizon_hours"),
            sampling_stride_hours=self.get_int("sampling_stride_hours"),
        )

    def split_spec(self):
        from fleetpdm.evalbench import SplitSpec

        try:
            fr = tuple(float(x) for x in self.get("train_fractions").split(",") if x.strip())
        except ValueError:
            raise ConfigError(f"train_fractions: not a list of numbers: {self.get('train_fractions')!r}") from None
        return SplitSpec(fr, self.get_float("balance_ratio"), self.get_bool("balance_test"), self.seed)

    def _params(self, family: str) -> dict:
        from fleetpdm.learners import DEFAULTS as LEARNER_DEFAULTS

        params = {}
        for name, default in LEARNER_DEFAULTS[family].items():
            key = f"{family}.{name}"
            params[name] = self.get_int(key) if isinstance(default, int) else self.get_float(key)
        return params

    def learner_names(self) -> list[str]:
        names = [x.strip() for x in self.get("learners").split(",") if x.strip()]
        if not names:
            raise ConfigError("learners: empty learner set")
        from fleetpdm.learners import FAMILIES

        unknown = [n for n in names if n not in FAMILIES]
        if unknown:
            raise ConfigError(f"learners: unknown family {unknown[0]!r}; choose from {','.join(FAMILIES)}")
        return names

    def learner_specs(self):
        from fleetpdm.learners import LearnerSpec

        return [LearnerSpec(f, self._params(f) if f != "lda" else {}, self.seed) for f in self.learner_names()]

    def rf_spec(self):
        from fleetpdm.learners import LearnerSpec

        return LearnerSpec("rf", self._params("rf"), self.seed)

    def dump(self) -> str:
        """Config snapshot as ``key=value`` text, in table order."""
        return "".join(f"{k}={v}\n" for k, v in self.values)


def load_config(path: str | Path | None = None, overrides: dict[str, str] | None = None) -> RunConfig:
    flat = read_config_file(path) if path else {}
    flat.update({k: v for k, v in (overrides or {}).items() if v is not None})
    return RunConfig.from_flat(flat)


def describe_defaults() -> str:
    width = max(len(k) for k in DEFAULTS)
    return "\n".join(f"{k:<{width}}  {d:<24} {doc}" for k, (d, doc) in DEFAULTS.items())
