"""CART decision tree (gini impurity) for binary targets.

Training is fully deterministic: candidate thresholds are midpoints
between consecutive sorted unique feature values, a split must strictly
decrease impurity, and ties break toward the lowest feature index, then
the lowest threshold.
"""

from __future__ import annotations

import numpy as np

_EPS = 1e-12

__all__ = ["DecisionTree"]


def _gini(n0: float, n1: float) -> float:
    n = n0 + n1
    if n == 0:
        return 0.0
    p0, p1 = n0 / n, n1 / n
    return 1.0 - p0 * p0 - p1 * p1


class DecisionTree:
    """Binary CART classifier over float feature matrices.

    Nodes serialize to plain dicts: internal nodes carry
    ``{"feature", "threshold", "left", "right"}``; leaves carry
    ``{"counts": [n0, n1]}``.
    """

    def __init__(self, max_depth: int | None = None, min_samples_split: int = 2):
        self.max_depth = max_depth
        self.min_samples_split = max(2, int(min_samples_split))
        self.root: dict | None = None
        self.n_features = 0

    def fit(self, X, y) -> "DecisionTree":
        X = np.asarray(X, dtype=np.float64)
        y = np.asarray(y, dtype=np.int64)
        self.n_features = X.shape[1]
        self.root = self._grow(X, y, depth=0)
        return self

    def _grow(self, X, y, depth: int) -> dict:
        n1 = int(y.sum())
        n0 = len(y) - n1
        leaf = {"counts": [n0, n1]}
        if (
            n0 == 0 or n1 == 0
            or len(y) < self.min_samples_split
            or (self.max_depth is not None and depth >= self.max_depth)
        ):
            return leaf
        split = self._best_split(X, y)
        if split is None:
            return leaf
        feature, threshold = split
        mask = X[:, feature] <= threshold
        return {
            "feature": int(feature),
            "threshold": float(threshold),
            "left": self._grow(X[mask], y[mask], depth + 1),
            "right": self._grow(X[~mask], y[~mask], depth + 1),
        }

    def _best_split(self, X, y):
        n = len(y)
        parent = _gini(n - y.sum(), y.sum())
        best_gain = 0.0
        best: tuple[int, float] | None = None
        for f in range(X.shape[1]):
            col = X[:, f]
            order = np.argsort(col, kind="stable")
            sv, sy = col[order], y[order]
            # positions where value changes: candidate cut after index i
            change = np.nonzero(np.diff(sv) > 0)[0]
            if len(change) == 0:
                continue
            ones_left = np.cumsum(sy)[change]
            total_left = change + 1
            zeros_left = total_left - ones_left
            ones_right = sy.sum() - ones_left
            zeros_right = (n - total_left) - ones_right
            gl = 1.0 - ((zeros_left / total_left) ** 2 + (ones_left / total_left) ** 2)
            total_right = n - total_left
            gr = 1.0 - ((zeros_right / total_right) ** 2 + (ones_right / total_right) ** 2)
            child = (total_left * gl + total_right * gr) / n
            gains = parent - child
            # lowest threshold among equal-gain cuts within this feature
            top = float(gains.max())
            idx = int(np.nonzero(gains >= top - _EPS)[0][0])
            gain = float(gains[idx])
            # strict impurity decrease; earlier feature wins float-level ties
            if gain > _EPS and gain > best_gain + _EPS:
                threshold = (sv[change[idx]] + sv[change[idx] + 1]) / 2.0
                best_gain = gain
                best = (f, float(threshold))
        return best

    # -- inference -------------------------------------------------------

    def _leaf(self, row) -> dict:
        node = self.root
        while "feature" in node:
            node = node["left"] if row[node["feature"]] <= node["threshold"] else node["right"]
        return node

    def predict_proba(self, X) -> np.ndarray:
        """P(class 1) from leaf class distributions."""
        X = np.asarray(X, dtype=np.float64)
        out = np.empty(len(X), dtype=np.float64)
        for i, row in enumerate(X):
            n0, n1 = self._leaf(row)["counts"]
            out[i] = n1 / (n0 + n1)
        return out

    def predict(self, X) -> np.ndarray:
        return (self.predict_proba(X) >= 0.5).astype(np.int64)

    # -- inspection ------------------------------------------------------

    def feature_importances(self) -> np.ndarray:
        """Total impurity decrease per feature, normalized to sum 1."""
        totals = np.zeros(self.n_features, dtype=np.float64)

        def node_counts(node) -> tuple[int, int]:
            if "counts" in node:
                return tuple(node["counts"])
            l0, l1 = node_counts(node["left"])
            r0, r1 = node_counts(node["right"])
            return (l0 + r0, l1 + r1)

        total_samples = sum(node_counts(self.root))

        def walk(node):
            if "counts" in node:
                return
            n0, n1 = node_counts(node)
            l0, l1 = node_counts(node["left"])
            r0, r1 = node_counts(node["right"])
            n, nl, nr = n0 + n1, l0 + l1, r0 + r1
            decrease = _gini(n0, n1) - (nl / n) * _gini(l0, l1) - (nr / n) * _gini(r0, r1)
            totals[node["feature"]] += (n / total_samples) * decrease
            walk(node["left"])
            walk(node["right"])

        walk(self.root)
        s = totals.sum()
        return totals / s if s > 0 else totals

    def depth(self) -> int:
        def d(node):
            if "counts" in node:
                return 0
            return 1 + max(d(node["left"]), d(node["right"]))
        return d(self.root)

    # -- (de)serialization -------------------------------------------------

    def to_json(self) -> dict:
        return {
            "max_depth": self.max_depth,
            "min_samples_split": self.min_samples_split,
            "n_features": self.n_features,
            "root": self.root,
        }

    @classmethod
    def from_json(cls, doc: dict) -> "DecisionTree":
        tree = cls(doc["max_depth"], doc["min_samples_split"])
        tree.n_features = doc["n_features"]
        tree.root = doc["root"]
        return tree
