"""Accuracy, multiclass MCC, rank AUC and drift-event accounting."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

__all__ = [
    "UndefinedAUCError",
    "accuracy",
    "confusion_matrix",
    "mcc",
    "auc",
    "DriftAccounting",
    "drift_accounting",
    "MetricsReport",
    "evaluate_run",
]


class UndefinedAUCError(ValueError):
    pass


def accuracy(true, pred) -> float:
    true = np.asarray(true)
    pred = np.asarray(pred)
    if true.shape != pred.shape:
        raise ValueError("true and pred differ in length")
    if true.size == 0:
        raise ValueError("accuracy of an empty sample is undefined")
    return float(np.mean(true == pred))


def confusion_matrix(true, pred, num_classes: Optional[int] = None) -> np.ndarray:
    """Counts with rows = true class, columns = predicted class."""
    true = np.asarray(true, dtype=np.intp)
    pred = np.asarray(pred, dtype=np.intp)
    if true.shape != pred.shape:
        raise ValueError("true and pred differ in length")
    if num_classes is None:
        num_classes = int(max(true.max(initial=0), pred.max(initial=0))) + 1
    cm = np.zeros((num_classes, num_classes), dtype=np.int64)
    np.add.at(cm, (true, pred), 1)
    return cm


def mcc(cm) -> float:
    """Gorodkin's multiclass Matthews correlation coefficient.

    Returns 0 when either the true or the predicted labels are constant.
    """
    cm = np.asarray(cm, dtype=np.float64)
    if cm.ndim != 2 or cm.shape[0] != cm.shape[1] or cm.size == 0:
        raise ValueError("need a non-empty square confusion matrix")
    s = cm.sum()
    if s == 0:
        return 0.0
    t = cm.sum(axis=1)
    p = cm.sum(axis=0)
    c = np.trace(cm)
    cov_pp = s * s - float(p @ p)
    cov_tt = s * s - float(t @ t)
    if cov_pp == 0 or cov_tt == 0:
        return 0.0
    value = (c * s - float(t @ p)) / math.sqrt(cov_pp * cov_tt)
    return float(min(1.0, max(-1.0, value)))


def _binary_auc(labels: np.ndarray, scores: np.ndarray) -> float:
    pos = labels == 1
    n_pos = int(pos.sum())
    n_neg = len(labels) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise UndefinedAUCError("AUC needs at least one positive and one negative instance")
    # average ranks handle ties as half wins
    order = np.argsort(scores, kind="mergesort")
    sorted_scores = scores[order]
    ranks = np.empty(len(scores), dtype=np.float64)
    _, first, counts = np.unique(sorted_scores, return_index=True, return_counts=True)
    avg = first + (counts + 1) / 2.0
    ranks[order] = np.repeat(avg, counts)
    u = ranks[pos].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def auc(true, scores) -> float:
    """Mann-Whitney AUC.

    ``scores`` is either a vector of positive-class scores (binary labels) or
    an ``(n, classes)`` matrix, in which case the macro average of the
    one-vs-rest AUCs is returned over classes that have both positives and
    negatives in ``true``.
    """
    true = np.asarray(true, dtype=np.intp)
    scores = np.asarray(scores, dtype=np.float64)
    if scores.ndim == 1:
        if scores.shape != true.shape:
            raise ValueError("scores and labels differ in length")
        return _binary_auc(true, scores)
    if scores.shape[0] != true.shape[0]:
        raise ValueError("scores and labels differ in length")
    if scores.shape[1] == 2:
        return _binary_auc(true, scores[:, 1])
    per_class = []
    for j in range(scores.shape[1]):
        target = (true == j).astype(np.intp)
        if 0 < target.sum() < len(target):
            per_class.append(_binary_auc(target, scores[:, j]))
    if not per_class:
        raise UndefinedAUCError("no class has both positive and negative instances")
    return float(np.mean(per_class))


@dataclass
class DriftAccounting:
    detected: int = 0
    matched: int = 0
    mean_delay: float = 0.0
    false_alarms: int = 0
    delays: list[int] = field(default_factory=list)


def drift_accounting(events: Iterable, injected: Sequence[int], tolerance_chunks: int) -> DriftAccounting:
    """Match detections to injected drifts, both given as chunk indices.

    Each injected drift takes the earliest unmatched detection at or after it
    and at most ``tolerance_chunks`` later. Unmatched detections are false
    alarms. ``events`` may hold ints or objects with a ``chunk_index``.
    """
    if tolerance_chunks < 0:
        raise ValueError("tolerance must be non-negative")
    chunks = sorted(int(getattr(e, "chunk_index", e)) for e in events)
    used = [False] * len(chunks)
    delays = []
    for inj in sorted(int(i) for i in injected):
        for j, ch in enumerate(chunks):
            if not used[j] and 0 <= ch - inj <= tolerance_chunks:
                used[j] = True
                delays.append(ch - inj)
                break
    return DriftAccounting(
        detected=len(chunks),
        matched=len(delays),
        mean_delay=float(np.mean(delays)) if delays else 0.0,
        false_alarms=len(chunks) - len(delays),
        delays=delays,
    )


@dataclass
class MetricsReport:
    accuracy: float
    mcc: float
    auc: float
    drift_count: int
    label_requests: int
    chunk_accuracy: list[float]
    chunk_mcc: list[float]
    chunk_auc: list[float]


def _safe_auc(true, scores) -> float:
    try:
        return auc(true, scores)
    except UndefinedAUCError:
        return float("nan")


def evaluate_run(result, num_classes: Optional[int] = None) -> MetricsReport:
    """Score every post-initialization prediction of a stream run."""
    c = num_classes or result.probabilities.shape[1]
    chunk_acc, chunk_mcc, chunk_auc = [], [], []
    for s in result.chunk_slices():
        chunk_acc.append(accuracy(result.labels[s], result.predictions[s]))
        chunk_mcc.append(mcc(confusion_matrix(result.labels[s], result.predictions[s], c)))
        chunk_auc.append(_safe_auc(result.labels[s], result.probabilities[s]))
    return MetricsReport(
        accuracy=accuracy(result.labels, result.predictions),
        mcc=mcc(confusion_matrix(result.labels, result.predictions, c)),
        auc=_safe_auc(result.labels, result.probabilities),
        drift_count=result.drift_count,
        label_requests=result.label_requests,
        chunk_accuracy=chunk_acc,
        chunk_mcc=chunk_mcc,
        chunk_auc=chunk_auc,
    )
