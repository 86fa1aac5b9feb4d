"""Classification and regression metrics.

Confusion matrices follow the convention rows = predicted band, columns =
observed band. ROC AUC uses average ranks, which groups tied scores into
single threshold steps and matches the pairwise-concordance statistic with
half credit for ties exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.stats import rankdata

from .schema import BAND_LABELS


class MetricsError(ValueError):
    pass


@dataclass
class ConfusionMatrix:
    labels: tuple
    counts: np.ndarray  # rows = predicted, columns = observed

    @property
    def total(self) -> int:
        return int(self.counts.sum())


def confusion(pred_labels, true_labels, n_classes: int = 3, labels=BAND_LABELS) -> ConfusionMatrix:
    pred = np.asarray(pred_labels, dtype=np.int64)
    true = np.asarray(true_labels, dtype=np.int64)
    if pred.size == 0:
        raise MetricsError("cannot build a confusion matrix from empty inputs")
    if pred.shape != true.shape:
        raise MetricsError(f"length mismatch: {pred.shape} predicted vs {true.shape} observed")
    counts = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(counts, (pred, true), 1)
    return ConfusionMatrix(tuple(labels[:n_classes]), counts)


@dataclass
class ClassificationScores:
    precision: np.ndarray  # per class
    recall: np.ndarray
    precision_macro: float
    recall_macro: float
    accuracy: float
    zero_division_flags: list  # class names hit by the 0/0 -> 0 convention


def precision_recall_accuracy(cm: ConfusionMatrix) -> ClassificationScores:
    """Per-class precision/recall with macro averages and overall accuracy.

    A class with a zero denominator contributes 0 and is flagged.
    """
    counts = cm.counts.astype(np.float64)
    if counts.sum() == 0:
        raise MetricsError("empty confusion matrix")
    tp = np.diag(counts)
    predicted = counts.sum(axis=1)
    observed = counts.sum(axis=0)
    flags = []
    precision = np.zeros(len(cm.labels))
    recall = np.zeros(len(cm.labels))
    for c in range(len(cm.labels)):
        if predicted[c] > 0:
            precision[c] = tp[c] / predicted[c]
        else:
            flags.append(f"precision[{cm.labels[c]}]")
        if observed[c] > 0:
            recall[c] = tp[c] / observed[c]
        else:
            flags.append(f"recall[{cm.labels[c]}]")
    return ClassificationScores(
        precision=precision,
        recall=recall,
        precision_macro=float(precision.mean()),
        recall_macro=float(recall.mean()),
        accuracy=float(tp.sum() / counts.sum()),
        zero_division_flags=flags,
    )


def roc_auc(scores, labels) -> float:
    """Area under the ROC curve for binary labels.

    Computed from average ranks, equivalent to the probability a random
    positive outscores a random negative with half credit for ties.
    """
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels)
    if s.shape != y.shape:
        raise MetricsError("scores and labels must have equal length")
    pos = y == 1
    n_pos = int(pos.sum())
    n_neg = int(y.size - n_pos)
    if n_pos == 0 or n_neg == 0:
        raise MetricsError("roc_auc requires both classes present")
    ranks = rankdata(s, method="average")
    u = ranks[pos].sum() - n_pos * (n_pos + 1) / 2.0
    return u / (n_pos * n_neg)


@dataclass
class MulticlassAucResult:
    macro: float
    per_class: dict
    excluded: list  # classes absent from the labels


def multiclass_auc_detail(prob_vectors, labels, n_classes: Optional[int] = None) -> MulticlassAucResult:
    """One-vs-rest AUC per class from probability columns, macro averaged.

    Classes absent from the labels are excluded from the macro mean and
    reported in ``excluded``.
    """
    probs = np.asarray(prob_vectors, dtype=np.float64)
    y = np.asarray(labels, dtype=np.int64)
    if probs.ndim != 2 or probs.shape[0] != y.shape[0]:
        raise MetricsError("prob_vectors must be (n, n_classes) aligned with labels")
    k = n_classes or probs.shape[1]
    present = np.unique(y)
    if present.size < 2:
        raise MetricsError("multiclass AUC requires at least two classes present")
    per_class = {}
    excluded = []
    for c in range(k):
        mask = (y == c).astype(np.int64)
        if mask.sum() == 0 or mask.sum() == y.size:
            excluded.append(c)
            continue
        per_class[c] = roc_auc(probs[:, c], mask)
    macro = float(np.mean(list(per_class.values())))
    return MulticlassAucResult(macro=macro, per_class=per_class, excluded=excluded)


def multiclass_auc(prob_vectors, labels, n_classes: Optional[int] = None) -> float:
    return multiclass_auc_detail(prob_vectors, labels, n_classes).macro


@dataclass
class RegressionMetrics:
    mae: float
    mape: float  # percent; zero observations excluded
    rmse: float
    mape_excluded: int = 0
    n: int = 0


def regression_metrics(pred, obs) -> RegressionMetrics:
    """MAE, MAPE (percent), and RMSE on the original scale.

    Zero observations are excluded from MAPE element-wise and the exclusion
    count is reported.
    """
    p = np.asarray(pred, dtype=np.float64)
    o = np.asarray(obs, dtype=np.float64)
    if p.size == 0 or p.shape != o.shape:
        raise MetricsError("pred and obs must be equal-length non-empty vectors")
    err = np.abs(p - o)
    mae = float(err.mean())
    rmse = float(np.sqrt(np.mean((p - o) ** 2)))
    nz = o != 0
    excluded = int((~nz).sum())
    mape = float(100.0 * np.mean(err[nz] / np.abs(o[nz]))) if nz.any() else float("nan")
    return RegressionMetrics(mae=mae, mape=mape, rmse=rmse, mape_excluded=excluded, n=int(p.size))


@dataclass
class EvaluationReport:
    """Classification quality plus per-band and overall regression errors."""

    auc_macro: float
    accuracy: float
    precision_macro: float
    recall_macro: float
    per_class_precision: dict
    per_class_recall: dict
    confusion: ConfusionMatrix
    regression_overall: Optional[RegressionMetrics] = None
    regression_per_band: dict = field(default_factory=dict)
    flags: list = field(default_factory=list)

    def to_flat_dict(self, prefix: str = "") -> dict:
        out = {
            f"{prefix}classification.auc_macro": self.auc_macro,
            f"{prefix}classification.accuracy": self.accuracy,
            f"{prefix}classification.precision_macro": self.precision_macro,
            f"{prefix}classification.recall_macro": self.recall_macro,
        }
        for lbl, v in self.per_class_precision.items():
            out[f"{prefix}classification.precision.{lbl}"] = v
        for lbl, v in self.per_class_recall.items():
            out[f"{prefix}classification.recall.{lbl}"] = v
        for i, pl in enumerate(self.confusion.labels):
            for j, ol in enumerate(self.confusion.labels):
                out[f"{prefix}classification.confusion.pred_{pl}.obs_{ol}"] = int(self.confusion.counts[i, j])
        if self.regression_overall is not None:
            out[f"{prefix}regression.overall.mae"] = self.regression_overall.mae
            out[f"{prefix}regression.overall.mape"] = self.regression_overall.mape
            out[f"{prefix}regression.overall.rmse"] = self.regression_overall.rmse
        for band, rm in self.regression_per_band.items():
            out[f"{prefix}regression.{band}.mae"] = rm.mae
            out[f"{prefix}regression.{band}.mape"] = rm.mape
            out[f"{prefix}regression.{band}.rmse"] = rm.rmse
        if self.flags:
            out[f"{prefix}flags"] = ";".join(self.flags)
        return out
