"""Six classifier families behind one fit/predict contract."""

from __future__ import annotations

import ast
import hashlib
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from fleetpdm.features import FeatureMatrix, FeatureRow
from fleetpdm.learners.boosting import GBM, binomial_deviance
from fleetpdm.learners.discriminant import (
    LDA,
    MDA,
    PDA,
    ConvergenceWarning,
    SingularCovarianceError,
)
from fleetpdm.learners.forest import RandomForest, oob_permutation_importance
from fleetpdm.learners.mars import MARS, gcv

FAMILIES = ("lda", "pda", "mda", "mars", "gbm", "rf")

DEFAULTS: dict[str, dict] = {
    "lda": {},
    "pda": {"lam": 1.0},
    "mda": {"subclasses": 3, "em_max_iter": 100, "em_rel_tol": 1e-6},
    "mars": {"max_terms": 21, "gcv_penalty": 3.0, "degree": 1},
    "gbm": {"n_trees": 100, "max_depth": 3, "shrinkage": 0.1, "min_leaf": 5},
    "rf": {"n_trees": 200, "mtry": 5, "min_leaf": 5},
}

ESTIMATORS = {"lda": LDA, "pda": PDA, "mda": MDA, "mars": MARS, "gbm": GBM, "rf": RandomForest}


@dataclass(frozen=True)
class LearnerSpec:
    family: str
    params: dict = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown learner family {self.family!r}; choose from {FAMILIES}")
        unknown = set(self.params) - set(DEFAULTS[self.family])
        if unknown:
            raise ValueError(f"{self.family}: unknown hyperparameter(s) {sorted(unknown)}")
        merged = {**DEFAULTS[self.family], **self.params}
        object.__setattr__(self, "params", merged)
        # constructing the estimator validates ranges
        self.make_estimator()

    def make_estimator(self):
        p = self.params
        f = self.family
        if f == "lda":
            return LDA()
        if f == "pda":
            return PDA(lam=float(p["lam"]))
        if f == "mda":
            return MDA(int(p["subclasses"]), int(p["em_max_iter"]), float(p["em_rel_tol"]), self.seed)
        if f == "mars":
            return MARS(int(p["max_terms"]), float(p["gcv_penalty"]), int(p["degree"]))
        if f == "gbm":
            return GBM(int(p["n_trees"]), int(p["max_depth"]), float(p["shrinkage"]), int(p["min_leaf"]))
        return RandomForest(int(p["n_trees"]), int(p["mtry"]), int(p["min_leaf"]), self.seed)


@dataclass(frozen=True)
class Prediction:
    label: int
    score: float


@dataclass(frozen=True, eq=False)
class TrainedModel:
    family: str
    estimator: object
    names: tuple[str, ...]
    meta: dict = field(default_factory=dict)

    @property
    def ledger_hash(self) -> str:
        return ledger_hash(self.names)


def ledger_hash(names) -> str:
    return hashlib.sha256("\n".join(names).encode()).hexdigest()[:16]


def fit(spec: LearnerSpec, matrix: FeatureMatrix) -> TrainedModel:
    if len(matrix) == 0:
        raise ValueError("cannot fit on an empty feature matrix")
    if not np.isfinite(matrix.X).all():
        raise ValueError("feature matrix contains non-finite values")
    if len(np.unique(matrix.y)) < 2:
        raise ValueError(f"{spec.family}: training set has a single class")
    est = spec.make_estimator()
    t0 = time.perf_counter()
    est.fit(matrix.X, matrix.y)
    wall = time.perf_counter() - t0
    return TrainedModel(spec.family, est, tuple(matrix.names), {"rows": len(matrix), "fit_seconds": wall})


def predict_scores(model: TrainedModel, X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != len(model.names):
        raise ValueError(f"expected {len(model.names)} feature columns, got shape {X.shape}")
    return np.clip(model.estimator.predict_proba(X), 0.0, 1.0)


def predict_labels(model: TrainedModel, X: np.ndarray) -> np.ndarray:
    return (predict_scores(model, X) >= 0.5).astype(np.int64)


def predict(model: TrainedModel, row: FeatureRow) -> Prediction:
    if tuple(row.names) != model.names:
        raise ValueError("feature row does not match the model's feature ledger")
    s = float(predict_scores(model, np.array([row.values]))[0])
    return Prediction(int(s >= 0.5), s)


def predict_matrix(model: TrainedModel, matrix: FeatureMatrix) -> np.ndarray:
    if tuple(matrix.names) != model.names:
        raise ValueError("feature matrix does not match the model's feature ledger")
    return predict_labels(model, matrix.X)


def permutation_importance(model: TrainedModel, matrix: FeatureMatrix, seed: int = 0) -> np.ndarray:
    """OOB permutation importance of a random-forest model trained on ``matrix``."""
    if model.family != "rf":
        raise ValueError(f"permutation importance needs an rf model, got {model.family}")
    if tuple(matrix.names) != model.names:
        raise ValueError("feature matrix does not match the model's feature ledger")
    return oob_permutation_importance(model.estimator, matrix.X, matrix.y, seed)


# -- flat text serialization ----------------------------------------------------
#
#   fleetpdm-model 1
#   family=<family>
#   ledger_hash=<hex>
#   ledger=<name>,<name>,...
#   meta.<key>=<value>
#   [<param> <kind> <shape>]
#   <values, space separated, shortest round-trip repr>


def save_model(model: TrainedModel, path: str | Path) -> None:
    lines = ["fleetpdm-model 1", f"family={model.family}", f"ledger_hash={model.ledger_hash}",
             "ledger=" + ",".join(model.names)]
    for k, v in sorted(model.meta.items()):
        lines.append(f"meta.{k}={v!r}")
    for name, value in model.estimator.state().items():
        arr = np.asarray(value)
        kind = "int" if arr.dtype.kind in "iub" else "float"
        shape = "x".join(map(str, arr.shape)) if arr.ndim else "scalar"
        lines.append(f"[{name} {kind} {shape}]")
        flat = arr.ravel().tolist()
        lines.append(" ".join(repr(float(v)) if kind == "float" else str(int(v)) for v in flat))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_model(path: str | Path) -> TrainedModel:
    lines = Path(path).read_text(encoding="utf-8").split("\n")
    if lines[0] != "fleetpdm-model 1":
        raise ValueError(f"{path}: not a fleetpdm model file")
    head = {}
    meta = {}
    i = 1
    while i < len(lines) and not lines[i].startswith("["):
        k, _, v = lines[i].partition("=")
        if k.startswith("meta."):
            meta[k[5:]] = ast.literal_eval(v)
        elif k:
            head[k] = v
        i += 1
    names = tuple(head["ledger"].split(","))
    if ledger_hash(names) != head["ledger_hash"]:
        raise ValueError(f"{path}: ledger hash mismatch")
    state = {}
    while i < len(lines) and lines[i].startswith("["):
        name, kind, shape = lines[i][1:-1].split(" ")
        body = lines[i + 1].split() if i + 1 < len(lines) else []
        conv = int if kind == "int" else float
        vals = np.array([conv(v) for v in body], dtype=np.int64 if kind == "int" else float)
        if shape == "scalar":
            state[name] = vals[0].item()
        else:
            state[name] = vals.reshape(tuple(int(s) for s in shape.split("x")))
        i += 2
    family = head["family"]
    return TrainedModel(family, ESTIMATORS[family].from_state(state), names, meta)


__all__ = [
    "FAMILIES", "DEFAULTS", "LearnerSpec", "TrainedModel", "Prediction", "fit", "predict",
    "predict_scores", "predict_labels", "predict_matrix", "permutation_importance",
    "save_model", "load_model", "ledger_hash", "LDA", "PDA", "MDA", "MARS", "GBM",
    "RandomForest", "SingularCovarianceError", "ConvergenceWarning", "binomial_deviance", "gcv",
]
