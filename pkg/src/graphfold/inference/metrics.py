"""Classification error under label permutation, and ROC curves."""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from ..errors import DimensionError, InputError, UndefinedAUCError

# brute-force permutation search up to this many labels, Hungarian above
MAX_BRUTE_LABELS = 6


def _contingency(predicted, truth):
    predicted = np.asarray(predicted).ravel()
    truth = np.asarray(truth).ravel()
    if predicted.shape != truth.shape:
        raise DimensionError(f"label vectors differ in length: {predicted.size} vs {truth.size}")
    if predicted.size == 0:
        raise InputError("label vectors are empty")
    _, p_idx = np.unique(predicted, return_inverse=True)
    _, t_idx = np.unique(truth, return_inverse=True)
    table = np.zeros((p_idx.max() + 1, t_idx.max() + 1), dtype=np.int64)
    np.add.at(table, (p_idx, t_idx), 1)
    return table


def classification_error(predicted, truth) -> float:
    """Smallest mismatch fraction over all matchings of predicted to true labels.

    Labels may be any hashable values; only the partition matters.
    """
    table = _contingency(predicted, truth)
    n = table.sum()
    kp, kt = table.shape
    if kp == kt and kp <= MAX_BRUTE_LABELS:
        cols = np.arange(kt)
        best = max(table[list(perm), cols].sum()
                   for perm in itertools.permutations(range(kp)))
    else:
        rows, cols = linear_sum_assignment(table, maximize=True)
        best = table[rows, cols].sum()
    return float(1.0 - best / n)


@dataclass
class RocCurve:
    """ROC curve over distinct score thresholds, from (0, 0) to (1, 1)."""

    thresholds: np.ndarray
    tpr: np.ndarray
    fpr: np.ndarray
    auc: float


def roc_auc(scores, labels) -> RocCurve:
    """ROC curve and trapezoidal AUC.

    Points sharing a score form a single threshold step, which makes the
    area equal to the probability that a random positive outscores a random
    negative (ties counting one half).

    Raises
    ------
    UndefinedAUCError
        If all labels belong to one class.
    """
    scores = np.asarray(scores, dtype=float).ravel()
    labels = np.asarray(labels).ravel().astype(bool)
    if scores.shape != labels.shape:
        raise DimensionError("scores and labels differ in length")
    if not np.all(np.isfinite(scores)):
        raise InputError("scores must be finite")
    n_pos = int(labels.sum())
    n_neg = labels.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise UndefinedAUCError("AUC needs at least one positive and one negative label")
    order = np.argsort(-scores, kind="stable")
    s, y = scores[order], labels[order]
    last = np.r_[np.flatnonzero(np.diff(s) != 0), s.size - 1]
    tp = np.r_[0, np.cumsum(y)[last]].astype(np.int64)
    fp = np.r_[0, np.cumsum(~y)[last]].astype(np.int64)
    # exact integer trapezoid, one division at the end
    twice_area = int(np.sum((fp[1:] - fp[:-1]) * (tp[1:] + tp[:-1])))
    auc = twice_area / (2 * n_pos * n_neg)
    return RocCurve(thresholds=np.r_[np.inf, s[last]], tpr=tp / n_pos,
                    fpr=fp / n_neg, auc=float(auc))
