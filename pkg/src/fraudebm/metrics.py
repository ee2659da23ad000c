"""Classification metrics and the overfitting gap check."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .errors import ValidationError


@dataclass
class MetricsReport:
    precision: float
    recall: float
    f1: float
    roc_auc: float
    threshold: float
    tp: int
    fp: int
    tn: int
    fn: int
    fold: str = "aggregate"
    undefined_precision: bool = False
    undefined_recall: bool = False

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class OverfitReport:
    mean_train: float
    mean_test: float
    gap: float
    threshold: float
    verdict: str  # "pass" | "fail"

    def to_dict(self) -> dict:
        return asdict(self)


def _average_ranks(values: np.ndarray) -> np.ndarray:
    """Ranks 1..n with ties assigned the group average."""
    order = np.argsort(values, kind="mergesort")
    sorted_vals = values[order]
    ranks = np.empty(len(values), dtype=np.float64)
    i = 0
    n = len(values)
    while i < n:
        j = i
        while j + 1 < n and sorted_vals[j + 1] == sorted_vals[i]:
            j += 1
        ranks[order[i : j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def roc_auc(labels: np.ndarray, scores: np.ndarray) -> float:
    """Rank-based (Mann-Whitney) AUC with average ranks for tied scores.

    Equals P(score+ > score-) + 0.5 * P(tie).
    """
    labels = np.asarray(labels)
    scores = np.asarray(scores, dtype=np.float64)
    if labels.shape != scores.shape:
        raise ValidationError("labels and scores must have equal length")
    n_pos = int((labels == 1).sum())
    n_neg = int((labels == 0).sum())
    if n_pos == 0 or n_neg == 0:
        raise ValidationError("roc_auc requires both classes present")
    ranks = _average_ranks(scores)
    rank_sum_pos = ranks[labels == 1].sum()
    return float((rank_sum_pos - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def precision_recall_f1(labels, preds, threshold: float = 0.5,
                        fold: str = "aggregate") -> MetricsReport:
    """Confusion-count metrics. Zero-denominator cases return 0 and are
    flagged rather than propagating NaN."""
    labels = np.asarray(labels)
    preds = np.asarray(preds)
    if labels.shape != preds.shape:
        raise ValidationError("labels and predictions must have equal length")
    tp = int(((labels == 1) & (preds == 1)).sum())
    fp = int(((labels == 0) & (preds == 1)).sum())
    tn = int(((labels == 0) & (preds == 0)).sum())
    fn = int(((labels == 1) & (preds == 0)).sum())
    undef_p = (tp + fp) == 0
    undef_r = (tp + fn) == 0
    precision = 0.0 if undef_p else tp / (tp + fp)
    recall = 0.0 if undef_r else tp / (tp + fn)
    f1 = 0.0 if (precision + recall) == 0 else 2 * precision * recall / (precision + recall)
    return MetricsReport(
        precision=precision, recall=recall, f1=f1, roc_auc=float("nan"),
        threshold=threshold, tp=tp, fp=fp, tn=tn, fn=fn, fold=fold,
        undefined_precision=undef_p, undefined_recall=undef_r,
    )


def overfit_gap(train_scores, test_scores, threshold: float = 0.1) -> OverfitReport:
    """Gap between mean train and mean test scores; pass iff gap < threshold."""
    train_scores = list(train_scores)
    test_scores = list(test_scores)
    if not train_scores or not test_scores:
        raise ValidationError("train and test score lists must be non-empty")
    mean_train = float(np.mean(train_scores))
    mean_test = float(np.mean(test_scores))
    gap = mean_train - mean_test
    return OverfitReport(
        mean_train=mean_train,
        mean_test=mean_test,
        gap=gap,
        threshold=threshold,
        verdict="pass" if gap < threshold else "fail",
    )
