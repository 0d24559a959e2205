"""Model training, testing, persistence and inspection.

``train`` drops null-variance features, holds out a stratified 20%
test split, grid-searches hyperparameters by k-fold cross-validated
accuracy on the train split, refits the winner and reports the metric
suite for both splits. Models are named
``{dataset}_{format}_{n}_{algo}_f{k}`` after the reference dataset, its
size, the algorithm and the number of surviving features.
"""

from __future__ import annotations

import itertools
import json
import logging
import random
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from packlab.config import ALGORITHMS_FILE, conf_path
from packlab.dataset.store import Dataset, FeatureMatrix
from packlab.errors import (
    CorruptDump,
    MissingFeature,
    SingleClassDataset,
    TooFewSamples,
    UnknownAlgorithm,
    UnsupportedAlgorithmKind,
    VersionMismatch,
)
from packlab.model.knn import KNearestNeighbors
from packlab.model.metrics import MetricsRecord, metrics_from
from packlab.model.tree import DecisionTree

log = logging.getLogger(__name__)

DUMP_SCHEMA = 1

BACKED_KINDS = {"decision_tree", "k_nearest_neighbors"}

__all__ = [
    "AlgorithmSpec",
    "Model",
    "load_algorithms",
    "train",
    "test",
    "rank_features",
    "dump",
    "load",
    "drop_null_variance",
]


@dataclass(frozen=True)
class AlgorithmSpec:
    name: str
    kind: str
    grid: dict[str, list]
    cv_folds: int = 5

    def __post_init__(self):
        if not self.grid:
            raise ValueError(f"algorithm {self.name}: empty grid")

    def configs(self) -> list[dict]:
        """Grid cross product in declaration order; earlier wins ties."""
        keys = list(self.grid)
        return [
            dict(zip(keys, combo))
            for combo in itertools.product(*(self.grid[k] for k in keys))
        ]


def load_algorithms(path=None) -> dict[str, AlgorithmSpec]:
    registry = Path(path) if path else conf_path(ALGORITHMS_FILE)
    with open(registry, "r", encoding="utf-8") as fh:
        doc = yaml.safe_load(fh) or {}
    return {
        name: AlgorithmSpec(
            name=name,
            kind=entry["kind"],
            grid={k: list(v) for k, v in entry.get("grid", {}).items()},
            cv_folds=int(entry.get("cv_folds", 5)),
        )
        for name, entry in doc.items()
    }


def get_algorithm(name: str, path=None) -> AlgorithmSpec:
    algorithms = load_algorithms(path)
    if name not in algorithms:
        raise UnknownAlgorithm(
            f"algorithm {name!r} not in registry ({', '.join(algorithms)})"
        )
    return algorithms[name]


@dataclass
class Model:
    name: str
    algorithm: str
    kind: str
    feature_names: list[str]
    hyperparams: dict
    classifier: object
    metrics: dict[str, MetricsRecord] = field(default_factory=dict)
    dataset: str = ""

    def predict_frame(self, frame: FeatureMatrix) -> np.ndarray:
        X = _align(frame, self.feature_names)
        return self.classifier.predict(X)

    def proba_frame(self, frame: FeatureMatrix) -> np.ndarray:
        X = _align(frame, self.feature_names)
        return self.classifier.predict_proba(X)


def _align(frame: FeatureMatrix, names: list[str]) -> np.ndarray:
    missing = [n for n in names if n not in frame.names]
    if missing:
        raise MissingFeature(f"dataset lacks model features {missing}")
    idx = [frame.names.index(n) for n in names]
    return frame.values[:, idx]


def drop_null_variance(frame: FeatureMatrix) -> FeatureMatrix:
    """Remove features whose value never varies across the dataset."""
    if frame.values.size == 0:
        return frame
    keep = [
        i for i in range(frame.values.shape[1])
        if float(np.ptp(frame.values[:, i])) != 0.0
    ]
    return FeatureMatrix(
        names=[frame.names[i] for i in keep],
        shas=frame.shas,
        labels=frame.labels,
        values=frame.values[:, keep],
    )


def _format_token(formats: list[str]) -> str:
    families = {f[:-2].lower() for f in formats}
    if len(families) == 1:
        return families.pop()
    return "all" if families else "none"


def _stratified_split(y: np.ndarray, test_fraction: float, seed: int):
    rng = random.Random(seed)
    test_idx: list[int] = []
    for cls in sorted(set(y.tolist())):
        members = [int(i) for i in np.nonzero(y == cls)[0]]
        rng.shuffle(members)
        cut = max(1, round(test_fraction * len(members)))
        test_idx.extend(members[:cut])
    mask = np.zeros(len(y), dtype=bool)
    mask[test_idx] = True
    return np.nonzero(~mask)[0], np.nonzero(mask)[0]


def _stratified_folds(y: np.ndarray, folds: int, seed: int) -> list[np.ndarray]:
    rng = random.Random(seed)
    assignment = np.zeros(len(y), dtype=np.int64)
    for cls in sorted(set(y.tolist())):
        members = [int(i) for i in np.nonzero(y == cls)[0]]
        rng.shuffle(members)
        for pos, idx in enumerate(members):
            assignment[idx] = pos % folds
    return [np.nonzero(assignment == f)[0] for f in range(folds)]


def _build_classifier(kind: str, config: dict):
    if kind == "decision_tree":
        return DecisionTree(
            max_depth=config.get("max_depth"),
            min_samples_split=config.get("min_samples_split", 2),
        )
    if kind == "k_nearest_neighbors":
        return KNearestNeighbors(k=config.get("k", 3))
    raise UnsupportedAlgorithmKind(f"no implementation backs kind {kind!r}")


def _metric_suite(clf, X, y) -> MetricsRecord:
    pred = clf.predict(X)
    proba = clf.predict_proba(X)
    tp = int(((pred == 1) & (y == 1)).sum())
    fp = int(((pred == 1) & (y == 0)).sum())
    fn = int(((pred == 0) & (y == 1)).sum())
    tn = int(((pred == 0) & (y == 0)).sum())
    return metrics_from(tp, fp, fn, tn, scores=list(zip(y.tolist(), proba.tolist())))


def train(ds: Dataset, algo: AlgorithmSpec | str, seed: int = 0) -> Model:
    """Train one model on a dataset's feature matrix (packed vs not)."""
    if isinstance(algo, str):
        algo = get_algorithm(algo)
    if algo.kind not in BACKED_KINDS:
        raise UnsupportedAlgorithmKind(
            f"algorithm {algo.name} has kind {algo.kind!r}; "
            f"backed kinds: {sorted(BACKED_KINDS)}"
        )
    frame = drop_null_variance(ds.feature_frame())
    y = frame.packed_bits
    if len(set(y.tolist())) < 2:
        raise SingleClassDataset("training needs both packed and not-packed samples")
    if len(y) < 2 * algo.cv_folds:
        raise TooFewSamples(
            f"{len(y)} samples < 2 x {algo.cv_folds} cross-validation folds"
        )

    train_idx, test_idx = _stratified_split(y, 0.2, seed)
    X_train, y_train = frame.values[train_idx], y[train_idx]
    X_test, y_test = frame.values[test_idx], y[test_idx]

    folds = _stratified_folds(y_train, algo.cv_folds, seed)
    best_config, best_accuracy = None, -1.0
    for config in algo.configs():
        correct = total = 0
        for f, val_idx in enumerate(folds):
            if len(val_idx) == 0:
                continue
            fit_idx = np.concatenate([folds[g] for g in range(len(folds)) if g != f])
            clf = _build_classifier(algo.kind, config)
            clf.fit(X_train[fit_idx], y_train[fit_idx])
            pred = clf.predict(X_train[val_idx])
            correct += int((pred == y_train[val_idx]).sum())
            total += len(val_idx)
        accuracy = correct / total if total else 0.0
        if accuracy > best_accuracy:  # first config wins ties
            best_accuracy, best_config = accuracy, config

    classifier = _build_classifier(algo.kind, best_config)
    classifier.fit(X_train, y_train)

    name = (
        f"{ds.name}_{_format_token(ds.manifest.get('formats', []))}_"
        f"{len(ds.records)}_{algo.name}_f{len(frame.names)}"
    )
    model = Model(
        name=name,
        algorithm=algo.name,
        kind=algo.kind,
        feature_names=frame.names,
        hyperparams=dict(best_config),
        classifier=classifier,
        dataset=ds.name,
    )
    model.metrics["train"] = _metric_suite(classifier, X_train, y_train)
    model.metrics["test"] = _metric_suite(classifier, X_test, y_test)
    log.info("trained %s (cv accuracy %.4f, config %s)", name, best_accuracy, best_config)
    return model


def test(model: Model, ds: Dataset) -> MetricsRecord:
    """Metric suite of the model over a whole dataset."""
    frame = ds.feature_frame()
    X = _align(frame, model.feature_names)
    y = frame.packed_bits
    return _metric_suite(model.classifier, X, y)


def rank_features(model: Model) -> list[tuple[str, float]]:
    """Features by importance; empty for algorithms without one."""
    if model.kind == "decision_tree":
        importances = model.classifier.feature_importances()
        pairs = sorted(
            zip(model.feature_names, importances.tolist()),
            key=lambda kv: (-kv[1], kv[0]),
        )
        return pairs
    log.info("%s: feature ranking unavailable for %s", model.name, model.kind)
    return []


def dump(model: Model, path) -> Path:
    """Portable JSON dump (schema-versioned)."""
    doc = {
        "schema": DUMP_SCHEMA,
        "name": model.name,
        "algorithm": model.algorithm,
        "kind": model.kind,
        "dataset": model.dataset,
        "feature_names": model.feature_names,
        "hyperparams": model.hyperparams,
        "classifier": model.classifier.to_json(),
        "metrics": {k: m.to_json() for k, m in model.metrics.items()},
    }
    path = Path(path)
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def load(path) -> Model:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise CorruptDump(f"cannot read model dump {path}: {exc}") from exc
    schema = doc.get("schema")
    if schema != DUMP_SCHEMA:
        raise VersionMismatch(f"dump schema {schema!r}, expected {DUMP_SCHEMA}")
    try:
        kind = doc["kind"]
        classifier = (
            DecisionTree.from_json(doc["classifier"])
            if kind == "decision_tree"
            else KNearestNeighbors.from_json(doc["classifier"])
        )
        metrics = {
            split: MetricsRecord(
                accuracy=m["accuracy"], precision=m["precision"],
                recall=m["recall"], f_measure=m["f_measure"], mcc=m["mcc"],
                auc=m.get("auc"), flags=tuple(m.get("flags", ())),
            )
            for split, m in doc.get("metrics", {}).items()
        }
        return Model(
            name=doc["name"],
            algorithm=doc["algorithm"],
            kind=kind,
            feature_names=list(doc["feature_names"]),
            hyperparams=dict(doc["hyperparams"]),
            classifier=classifier,
            metrics=metrics,
            dataset=doc.get("dataset", ""),
        )
    except (KeyError, TypeError) as exc:
        raise CorruptDump(f"model dump {path} is missing fields: {exc}") from exc
