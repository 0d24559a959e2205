"""k-nearest-neighbors classifier (Euclidean distance, stored samples)."""

from __future__ import annotations

import numpy as np

__all__ = ["KNearestNeighbors"]


class KNearestNeighbors:
    """Majority vote over the k nearest training samples.

    Distance ties resolve by training-sample order (stable sort), so
    prediction is deterministic.
    """

    def __init__(self, k: int = 3):
        self.k = int(k)
        self.X: np.ndarray | None = None
        self.y: np.ndarray | None = None

    def fit(self, X, y) -> "KNearestNeighbors":
        self.X = np.asarray(X, dtype=np.float64)
        self.y = np.asarray(y, dtype=np.int64)
        return self

    def predict_proba(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        k = min(self.k, len(self.y))
        out = np.empty(len(X), dtype=np.float64)
        for i, row in enumerate(X):
            dist = np.sqrt(((self.X - row) ** 2).sum(axis=1))
            nearest = np.argsort(dist, kind="stable")[:k]
            out[i] = self.y[nearest].mean()
        return out

    def predict(self, X) -> np.ndarray:
        return (self.predict_proba(X) >= 0.5).astype(np.int64)

    def to_json(self) -> dict:
        return {
            "k": self.k,
            "X": self.X.tolist(),
            "y": self.y.tolist(),
        }

    @classmethod
    def from_json(cls, doc: dict) -> "KNearestNeighbors":
        model = cls(doc["k"])
        model.X = np.array(doc["X"], dtype=np.float64)
        model.y = np.array(doc["y"], dtype=np.int64)
        return model
