from packlab.model.knn import KNearestNeighbors
from packlab.model.metrics import MetricsRecord, auc_from_scores, metrics_from
from packlab.model.training import (
    AlgorithmSpec,
    Model,
    drop_null_variance,
    dump,
    get_algorithm,
    load,
    load_algorithms,
    rank_features,
    test,
    train,
)
from packlab.model.tree import DecisionTree

__all__ = [
    "KNearestNeighbors",
    "MetricsRecord",
    "auc_from_scores",
    "metrics_from",
    "AlgorithmSpec",
    "Model",
    "drop_null_variance",
    "dump",
    "get_algorithm",
    "load",
    "load_algorithms",
    "rank_features",
    "test",
    "train",
    "DecisionTree",
]
