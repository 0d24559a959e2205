"""Model training/metrics tests against independent formula oracles."""

import csv
import json
import math
import random

import numpy as np
import pytest

from packlab.dataset import Dataset, FilelessDataset
from packlab.errors import (
    CorruptDump,
    MissingFeature,
    SingleClassDataset,
    TooFewSamples,
    UnknownAlgorithm,
    UnsupportedAlgorithmKind,
    VersionMismatch,
)
from packlab.model import (
    DecisionTree,
    auc_from_scores,
    dump,
    get_algorithm,
    load,
    load_algorithms,
    metrics_from,
    rank_features,
    test as model_test,
    train,
)


def metrics_oracle(tp, fp, fn, tn):
    """Plain-arithmetic re-derivation of every formula."""
    n = tp + fp + fn + tn
    acc = (tp + tn) / n
    prec = tp / (tp + fp) if tp + fp else 0.0
    rec = tp / (tp + fn) if tp + fn else 0.0
    f = 2 * prec * rec / (prec + rec) if prec + rec else 0.0
    denom = (tp + fp) * (tp + fn) * (tn + fp) * (tn + fn)
    mcc = (tp * tn - fp * fn) / math.sqrt(denom) if denom else 0.0
    return acc, prec, rec, f, mcc


def auc_oracle(truth, scores):
    """Brute-force pairwise comparison (Mann-Whitney)."""
    pos = [s for t, s in zip(truth, scores) if t == 1]
    neg = [s for t, s in zip(truth, scores) if t == 0]
    if not pos or not neg:
        return None
    wins = 0.0
    for p in pos:
        for q in neg:
            if p > q:
                wins += 1.0
            elif p == q:
                wins += 0.5
    return wins / (len(pos) * len(neg))


def write_fileless(path, names, rows, labels):
    """Author a fileless dataset directly through its documented layout."""
    ds = Dataset.create(path, name=path.name)
    from packlab.dataset import SampleRecord
    for i, label in enumerate(labels):
        ds.records.append(SampleRecord(
            sha256=f"{i:064x}", filename=f"s{i}", format="PE32",
            size=1024, label=label,
        ))
    with open(path / "features.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["sha256", "label", *names])
        for i, (row, label) in enumerate(zip(rows, labels)):
            writer.writerow([f"{i:064x}", label, *[repr(float(v)) for v in row]])
    import shutil
    shutil.rmtree(path / "files")
    fl = FilelessDataset(path)
    fl.records, fl.manifest = ds.records, ds.manifest
    fl.save()
    return fl


def separable_dataset(tmp_path, n=120, seed=0, flip=0):
    """Feature 0 over 0.5 decides the class; other features are noise."""
    rng = random.Random(seed)
    names = ["f0", "f1", "f2"]
    rows, labels = [], []
    for i in range(n):
        packed = i % 2 == 0
        x0 = rng.uniform(0.55, 1.0) if packed else rng.uniform(0.0, 0.45)
        rows.append([x0, rng.random(), rng.random()])
        labels.append("demo" if packed else "not-packed")
    for i in range(flip):
        rows[i][0] = 1.0 - rows[i][0]
    return write_fileless(tmp_path / f"sep{seed}-{flip}", names, rows, labels)


class TestMetricsFormulas:
    def test_hand_evaluated_example(self):
        m = metrics_from(2, 1, 2, 5)
        assert m.precision == pytest.approx(2 / 3, abs=1e-12)
        assert m.recall == pytest.approx(1 / 2, abs=1e-12)
        assert m.f_measure == pytest.approx(4 / 7, abs=1e-12)
        assert m.accuracy == pytest.approx(0.7, abs=1e-12)

    def test_perfect_classifier(self):
        m = metrics_from(5, 0, 0, 5)
        assert m.accuracy == 1.0 and m.mcc == 1.0

    def test_perfectly_wrong_classifier(self):
        assert metrics_from(0, 5, 5, 0).mcc == -1.0

    def test_random_matrices_match_oracle(self):
        rng = random.Random(11)
        for _ in range(100):
            tp, fp, fn, tn = (rng.randrange(0, 50) for _ in range(4))
            if tp + fp + fn + tn == 0:
                tp = 1
            m = metrics_from(tp, fp, fn, tn)
            acc, prec, rec, f, mcc = metrics_oracle(tp, fp, fn, tn)
            assert m.accuracy == pytest.approx(acc, abs=1e-12)
            assert m.precision == pytest.approx(prec, abs=1e-12)
            assert m.recall == pytest.approx(rec, abs=1e-12)
            assert m.f_measure == pytest.approx(f, abs=1e-12)
            assert m.mcc == pytest.approx(mcc, abs=1e-12)

    def test_degenerate_denominators_flagged(self):
        m = metrics_from(0, 0, 3, 7)
        assert m.precision == 0.0 and m.flags

    def test_accuracy_equals_one_minus_hamming(self):
        rng = random.Random(5)
        for _ in range(25):
            n = rng.randrange(1, 60)
            truth = [rng.randrange(2) for _ in range(n)]
            pred = [rng.randrange(2) for _ in range(n)]
            tp = sum(1 for t, p in zip(truth, pred) if t == 1 and p == 1)
            fp = sum(1 for t, p in zip(truth, pred) if t == 0 and p == 1)
            fn = sum(1 for t, p in zip(truth, pred) if t == 1 and p == 0)
            tn = sum(1 for t, p in zip(truth, pred) if t == 0 and p == 0)
            hamming = sum(1 for t, p in zip(truth, pred) if t != p)
            assert metrics_from(tp, fp, fn, tn).accuracy == \
                pytest.approx(1 - hamming / n, abs=1e-12)

    def test_percent_formatting(self):
        cells = metrics_from(5, 0, 0, 5).cells()
        assert cells[0] == "100.00"


class TestAuc:
    def test_matches_pairwise_oracle(self):
        rng = random.Random(3)
        for _ in range(50):
            n = rng.randrange(2, 100)
            truth = [rng.randrange(2) for _ in range(n)]
            scores = [rng.choice([0.0, 0.25, 0.5, rng.random()]) for _ in range(n)]
            want = auc_oracle(truth, scores)
            got = auc_from_scores(truth, scores)
            if want is None:
                assert got is None
            else:
                assert got == pytest.approx(want, abs=1e-12)

    def test_random_scores_near_half(self):
        rng = random.Random(9)
        truth = [rng.randrange(2) for _ in range(1000)]
        scores = [rng.random() for _ in range(1000)]
        assert auc_from_scores(truth, scores) == pytest.approx(0.5, abs=0.05)

    def test_single_class_undefined(self):
        assert auc_from_scores([1, 1], [0.2, 0.4]) is None


class TestDecisionTree:
    def test_single_split_importance(self):
        X = np.array([[0.1, 5.0], [0.2, 5.0], [0.8, 5.0], [0.9, 5.0]])
        y = np.array([0, 0, 1, 1])
        tree = DecisionTree().fit(X, y)
        importances = tree.feature_importances()
        assert importances[0] == pytest.approx(1.0)
        assert importances[1] == 0.0

    def test_importances_sum_to_one_on_random_trees(self):
        rng = np.random.default_rng(4)
        for _ in range(10):
            X = rng.random((60, 5))
            y = (X[:, 2] + 0.2 * rng.random(60) > 0.6).astype(int)
            if len(set(y.tolist())) < 2:
                continue
            tree = DecisionTree(max_depth=6).fit(X, y)
            assert tree.feature_importances().sum() == pytest.approx(1.0, abs=1e-9)

    def test_pure_node_is_never_split(self):
        X = np.array([[1.0], [2.0], [3.0]])
        y = np.array([1, 1, 1])
        tree = DecisionTree().fit(X, y)
        assert "counts" in tree.root

    def test_tie_breaks_prefer_lowest_feature(self):
        # two identical columns: the split must use column 0
        X = np.array([[0.0, 0.0], [0.0, 0.0], [1.0, 1.0], [1.0, 1.0]])
        y = np.array([0, 0, 1, 1])
        tree = DecisionTree().fit(X, y)
        assert tree.root["feature"] == 0

    def test_deterministic_fit(self):
        rng = np.random.default_rng(0)
        X = rng.random((80, 4))
        y = (X[:, 1] > 0.5).astype(int)
        assert DecisionTree().fit(X, y).root == DecisionTree().fit(X, y).root

    def test_memorizes_training_data_when_unbounded(self):
        rng = np.random.default_rng(1)
        X = rng.random((50, 3))
        y = rng.integers(0, 2, 50)
        # distinct rows: a fully grown tree reproduces every label
        tree = DecisionTree(max_depth=None).fit(X, y)
        assert (tree.predict(X) == y).all()


class TestTraining:
    def test_separable_data_reaches_perfect_scores(self, tmp_path):
        ds = separable_dataset(tmp_path, n=120, seed=1)
        model = train(ds, "dt", seed=0)
        assert model.metrics["train"].cells()[0] == "100.00"
        assert model.metrics["test"].cells()[0] == "100.00"

    def test_model_name_pattern(self, tmp_path):
        ds = separable_dataset(tmp_path, n=100, seed=2)
        model = train(ds, "dt", seed=0)
        assert model.name == f"{ds.name}_pe_100_dt_f{len(model.feature_names)}"

    def test_single_class_rejected(self, tmp_path):
        ds = write_fileless(tmp_path / "one", ["f0"],
                            [[0.1]] * 20, ["demo"] * 20)
        with pytest.raises(SingleClassDataset):
            train(ds, "dt")

    def test_too_few_samples(self, tmp_path):
        ds = write_fileless(tmp_path / "tiny", ["f0"],
                            [[0.1], [0.9], [0.2], [0.8]],
                            ["not-packed", "demo"] * 2)
        with pytest.raises(TooFewSamples):
            train(ds, "dt")

    def test_unsupported_kind(self, tmp_path):
        ds = separable_dataset(tmp_path, n=60, seed=3)
        with pytest.raises(UnsupportedAlgorithmKind):
            train(ds, "svm")

    def test_unknown_algorithm(self):
        with pytest.raises(UnknownAlgorithm):
            get_algorithm("nosuchalgo")

    def test_knn_trains_too(self, tmp_path):
        ds = separable_dataset(tmp_path, n=80, seed=4)
        model = train(ds, "knn", seed=0)
        assert model.kind == "k_nearest_neighbors"
        assert model.metrics["test"].accuracy >= 0.9

    def test_training_is_deterministic(self, tmp_path):
        ds = separable_dataset(tmp_path, n=80, seed=5)
        a = train(ds, "dt", seed=7)
        b = train(ds, "dt", seed=7)
        assert a.hyperparams == b.hyperparams
        assert a.classifier.root == b.classifier.root
        assert a.metrics["test"] == b.metrics["test"]

    def test_registry_declares_sixteen_style_surface(self):
        algorithms = load_algorithms()
        assert {"dt", "knn", "svm"} <= set(algorithms)


class TestTestOp:
    def test_memorization_on_own_data(self, tmp_path):
        # fully grown tree applied to its own training rows
        ds = separable_dataset(tmp_path, n=100, seed=6, flip=0)
        model = train(ds, "dt", seed=0)
        record = model_test(model, ds)
        assert record.accuracy == 1.0

    def test_missing_feature(self, tmp_path):
        ds = separable_dataset(tmp_path, n=60, seed=7)
        model = train(ds, "dt", seed=0)
        other = write_fileless(tmp_path / "other", ["f0"],
                               [[0.1], [0.9]] * 10,
                               ["not-packed", "demo"] * 10)
        with pytest.raises(MissingFeature):
            model_test(model, other)

    def test_extra_features_ignored(self, tmp_path):
        ds = separable_dataset(tmp_path, n=60, seed=8)
        model = train(ds, "dt", seed=0)
        rng = random.Random(0)
        rows = [[0.9, 0.1, 0.1, 5.0] if i % 2 else [0.1, 0.9, 0.9, 5.0]
                for i in range(20)]
        other = write_fileless(
            tmp_path / "extra", ["f0", "f1", "f2", "bonus"],
            rows, ["demo" if i % 2 else "not-packed" for i in range(20)],
        )
        record = model_test(model, other)
        assert record.accuracy == 1.0


class TestRanking:
    def test_tree_ranking_sorted_and_complete(self, tmp_path):
        ds = separable_dataset(tmp_path, n=80, seed=9)
        model = train(ds, "dt", seed=0)
        ranking = rank_features(model)
        assert [n for n, _ in ranking][0] == "f0"
        assert sum(v for _, v in ranking) == pytest.approx(1.0, abs=1e-9)

    def test_knn_has_no_ranking(self, tmp_path):
        ds = separable_dataset(tmp_path, n=80, seed=10)
        model = train(ds, "knn", seed=0)
        assert rank_features(model) == []


class TestDumpLoad:
    def test_roundtrip_predicts_identically(self, tmp_path):
        ds = separable_dataset(tmp_path, n=80, seed=11)
        model = train(ds, "dt", seed=0)
        path = dump(model, tmp_path / "m.json")
        clone = load(path)
        rng = np.random.default_rng(0)
        X = rng.random((1000, len(model.feature_names)))
        assert (clone.classifier.predict(X) == model.classifier.predict(X)).all()

    def test_dump_contains_model_name(self, tmp_path):
        ds = separable_dataset(tmp_path, n=60, seed=12)
        model = train(ds, "dt", seed=0)
        path = dump(model, tmp_path / "m.json")
        assert model.name in path.read_text()

    def test_truncated_dump_is_corrupt(self, tmp_path):
        ds = separable_dataset(tmp_path, n=60, seed=13)
        path = dump(train(ds, "dt", seed=0), tmp_path / "m.json")
        path.write_text(path.read_text()[: 40])
        with pytest.raises(CorruptDump):
            load(path)

    def test_wrong_schema_version(self, tmp_path):
        ds = separable_dataset(tmp_path, n=60, seed=14)
        path = dump(train(ds, "dt", seed=0), tmp_path / "m.json")
        doc = json.loads(path.read_text())
        doc["schema"] = 999
        path.write_text(json.dumps(doc))
        with pytest.raises(VersionMismatch):
            load(path)

    def test_knn_roundtrip(self, tmp_path):
        ds = separable_dataset(tmp_path, n=60, seed=15)
        model = train(ds, "knn", seed=0)
        clone = load(dump(model, tmp_path / "k.json"))
        rng = np.random.default_rng(1)
        X = rng.random((200, len(model.feature_names)))
        assert (clone.classifier.predict(X) == model.classifier.predict(X)).all()
