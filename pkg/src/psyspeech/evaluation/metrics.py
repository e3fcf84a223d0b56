"""Accuracy, confusion counts, ROC curves and AUC."""

from dataclasses import dataclass

import numpy as np


def _binary(labels):
    y = np.asarray(labels).astype(np.int64).reshape(-1)
    if not np.all((y == 0) | (y == 1)):
        raise ValueError("labels must be 0/1")
    return y


def accuracy(pred, labels):
    pred, y = _binary(pred), _binary(labels)
    if pred.size != y.size or y.size == 0:
        raise ValueError("pred and labels must be equally sized and nonempty")
    return float((pred == y).mean())


@dataclass(frozen=True)
class Confusion:
    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def n(self):
        return self.tp + self.fp + self.tn + self.fn

    @property
    def accuracy(self):
        return (self.tp + self.tn) / self.n


def confusion(pred, labels):
    pred, y = _binary(pred), _binary(labels)
    return Confusion(int(((pred == 1) & (y == 1)).sum()), int(((pred == 1) & (y == 0)).sum()),
                     int(((pred == 0) & (y == 0)).sum()), int(((pred == 0) & (y == 1)).sum()))


@dataclass(frozen=True)
class RocCurve:
    fpr: np.ndarray
    tpr: np.ndarray
    thresholds: np.ndarray  # first entry is +inf (nothing predicted positive)


def _groups(scores, labels):
    s = np.asarray(scores, dtype=np.float64).reshape(-1)
    y = _binary(labels)
    if s.size != y.size:
        raise ValueError("scores and labels differ in length")
    if np.isnan(s).any():
        raise ValueError("scores contain NaN")
    P, N = int(y.sum()), int(y.size - y.sum())
    if P == 0 or N == 0:
        raise ValueError("ROC needs both classes")
    uniq, inv = np.unique(s, return_inverse=True)
    pos = np.bincount(inv, weights=y, minlength=uniq.size).astype(np.int64)[::-1]
    neg = np.bincount(inv, minlength=uniq.size).astype(np.int64)[::-1] - pos
    return uniq[::-1], pos, neg, P, N


def roc_curve(scores, labels):
    """Threshold sweep over the unique scores (score >= t predicts positive)."""
    thr, pos, neg, P, N = _groups(scores, labels)
    tp = np.concatenate([[0], np.cumsum(pos)])
    fp = np.concatenate([[0], np.cumsum(neg)])
    return RocCurve(fp / N, tp / P, np.concatenate([[np.inf], thr]))


def auc_trapezoid(scores, labels):
    """Trapezoid area under the ROC curve.

    The area is accumulated as an exact integer (twice the pair count) and
    divided once, so it equals the pair-count statistic bit for bit.
    """
    _, pos, neg, P, N = _groups(scores, labels)
    tp_before = np.concatenate([[0], np.cumsum(pos)[:-1]])
    twice = int((neg * (2 * tp_before + pos)).sum())
    return twice / (2 * P * N)


def auc_pairs(scores, labels):
    """O(n^2) Mann-Whitney pair count with ties counted one half."""
    s = np.asarray(scores, dtype=np.float64).reshape(-1)
    y = _binary(labels)
    sp, sn = s[y == 1], s[y == 0]
    if sp.size == 0 or sn.size == 0:
        raise ValueError("AUC needs both classes")
    diff = sp[:, None] - sn[None, :]
    return (int((diff > 0).sum()) + 0.5 * int((diff == 0).sum())) / (sp.size * sn.size)


def roc_auc(scores, labels):
    return roc_curve(scores, labels), auc_trapezoid(scores, labels)


def binomial_band(p, n, z=3.0):
    """Interval ``p +- z * sqrt(p (1 - p) / n)``."""
    sd = np.sqrt(p * (1.0 - p) / n)
    return p - z * sd, p + z * sd
