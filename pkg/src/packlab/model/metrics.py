"""Binary classification metrics from a confusion matrix plus scores.

All values live in [0, 1] except MCC in [-1, 1]. Degenerate
denominators yield 0 by convention and are flagged so reports can say
so. AUC comes from the rank statistic over predicted class-1 scores.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = ["MetricsRecord", "metrics_from", "auc_from_scores"]


@dataclass(frozen=True)
class MetricsRecord:
    accuracy: float
    precision: float
    recall: float
    f_measure: float
    mcc: float
    auc: float | None = None
    flags: tuple[str, ...] = field(default_factory=tuple)

    HEADER = ("Accuracy", "Precision", "Recall", "F-Measure", "MCC", "AUC")

    def cells(self) -> tuple[str, ...]:
        """Percentages with two decimals, blank when undefined."""
        vals = (self.accuracy, self.precision, self.recall,
                self.f_measure, self.mcc, self.auc)
        return tuple("" if v is None else f"{v * 100:.2f}" for v in vals)

    def to_json(self) -> dict:
        return {
            "accuracy": self.accuracy, "precision": self.precision,
            "recall": self.recall, "f_measure": self.f_measure,
            "mcc": self.mcc, "auc": self.auc, "flags": list(self.flags),
        }


def auc_from_scores(truth, scores) -> float | None:
    """Area under the ROC curve via the Mann-Whitney rank statistic.

    Ties contribute half; None when only one class is present.
    """
    truth = np.asarray(truth)
    scores = np.asarray(scores, dtype=np.float64)
    n_pos = int((truth == 1).sum())
    n_neg = int((truth == 0).sum())
    if n_pos == 0 or n_neg == 0:
        return None
    order = np.argsort(scores, kind="stable")
    ranks = np.empty(len(scores), dtype=np.float64)
    sorted_scores = scores[order]
    i = 0
    while i < len(scores):
        j = i
        while j + 1 < len(scores) and sorted_scores[j + 1] == sorted_scores[i]:
            j += 1
        ranks[order[i:j + 1]] = (i + j) / 2 + 1  # average rank, 1-based
        i = j + 1
    rank_sum_pos = float(ranks[truth == 1].sum())
    u = rank_sum_pos - n_pos * (n_pos + 1) / 2
    return u / (n_pos * n_neg)


def metrics_from(tp: int, fp: int, fn: int, tn: int,
                 scores=None) -> MetricsRecord:
    """Metric suite from confusion counts; ``scores`` is an optional
    sequence of (truth_bit, class-1 score) pairs for AUC."""
    total = tp + fp + fn + tn
    if total < 1:
        raise ValueError("empty confusion matrix")
    flags: list[str] = []

    accuracy = (tp + tn) / total
    if tp + fp == 0:
        precision = 0.0
        flags.append("precision undefined (no positive predictions), reported 0")
    else:
        precision = tp / (tp + fp)
    if tp + fn == 0:
        recall = 0.0
        flags.append("recall undefined (no positive truths), reported 0")
    else:
        recall = tp / (tp + fn)
    if precision + recall == 0:
        f_measure = 0.0
        flags.append("f-measure undefined, reported 0")
    else:
        f_measure = 2 * precision * recall / (precision + recall)

    denom = (tp + fp) * (tp + fn) * (tn + fp) * (tn + fn)
    if denom == 0:
        mcc = 0.0
        flags.append("mcc undefined (zero marginal), reported 0")
    else:
        mcc = (tp * tn - fp * fn) / float(np.sqrt(denom))

    auc = None
    if scores is not None:
        pairs = list(scores)
        auc = auc_from_scores([t for t, _ in pairs], [s for _, s in pairs])
        if auc is None:
            flags.append("auc undefined (single-class scores)")
    return MetricsRecord(
        accuracy=accuracy, precision=precision, recall=recall,
        f_measure=f_measure, mcc=mcc, auc=auc, flags=tuple(flags),
    )
