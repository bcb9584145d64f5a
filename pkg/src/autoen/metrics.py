"""Evaluation metrics: binary ROC AUC, multi-class log-loss, accuracy.

Binary ROC AUC reads the column of class index 1 as the positive-class score.
"""

from __future__ import annotations

import numpy as np

from .errors import ShapeMismatch, SingleClassPresent

LOG_LOSS_EPS = 1e-15


def midranks(values: np.ndarray) -> np.ndarray:
    """1-based ranks of ``values`` (ascending), ties replaced by their average rank."""
    values = np.asarray(values, dtype=np.float64)
    n = len(values)
    order = np.argsort(values, kind="mergesort")
    sorted_vals = values[order]
    # boundaries of runs of equal values
    starts = np.flatnonzero(np.r_[True, sorted_vals[1:] != sorted_vals[:-1]])
    ends = np.r_[starts[1:], n]
    run_rank = (starts + ends + 1) / 2.0           # mean of positions start+1..end
    ranks = np.empty(n)
    ranks[order] = np.repeat(run_rank, ends - starts)
    return ranks


def roc_auc_binary(scores, labels) -> float:
    """Area under the ROC curve via the Mann-Whitney rank-sum identity.

    Equals P(s_pos > s_neg) + 0.5 * P(s_pos == s_neg) over all
    positive/negative pairs.
    """
    scores = np.asarray(scores, dtype=np.float64).ravel()
    labels = np.asarray(labels).ravel()
    if scores.shape != labels.shape:
        raise ShapeMismatch(f"{len(scores)} scores but {len(labels)} labels")
    if not np.all(np.isfinite(scores)):
        raise ValueError("scores must be finite")
    pos = labels == 1
    n_pos = int(pos.sum())
    n_neg = len(labels) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise SingleClassPresent("roc_auc needs both classes in the labels")
    rank_sum = midranks(scores)[pos].sum()
    u = rank_sum - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def _check_probs(probs, labels) -> tuple[np.ndarray, np.ndarray]:
    P = np.asarray(probs, dtype=np.float64)
    y = np.asarray(labels, dtype=np.int64).ravel()
    if P.ndim != 2 or P.shape[0] != len(y):
        raise ShapeMismatch(f"probability matrix {P.shape} does not match {len(y)} labels")
    if len(y) and (y.min() < 0 or y.max() >= P.shape[1]):
        raise ShapeMismatch(f"labels out of range for {P.shape[1]} classes")
    return P, y


def log_loss_multiclass(probs, labels, eps: float = LOG_LOSS_EPS) -> float:
    """Mean negative log-likelihood after clipping to [eps, 1-eps] and renormalising rows."""
    P, y = _check_probs(probs, labels)
    if len(y) == 0:
        raise ShapeMismatch("log-loss of an empty set is undefined")
    P = np.clip(P, eps, 1 - eps)
    P = P / P.sum(axis=1, keepdims=True)
    return float(-np.mean(np.log(P[np.arange(len(y)), y])))


def accuracy(probs, labels) -> float:
    P, y = _check_probs(probs, labels)
    if len(y) == 0:
        raise ShapeMismatch("accuracy of an empty set is undefined")
    return float(np.mean(np.argmax(P, axis=1) == y))


# metric name -> (function over (probs, labels), higher_is_better)
def score(metric: str, probs, labels) -> float:
    if metric == "roc_auc":
        P = np.asarray(probs, dtype=np.float64)
        if P.ndim != 2 or P.shape[1] != 2:
            raise ShapeMismatch("roc_auc needs a two-column probability matrix")
        return roc_auc_binary(P[:, 1], labels)
    if metric == "log_loss":
        return log_loss_multiclass(probs, labels)
    if metric == "accuracy":
        return accuracy(probs, labels)
    raise ValueError(f"unknown metric {metric!r}")


HIGHER_IS_BETTER = {"roc_auc": True, "log_loss": False, "accuracy": True}


def is_better(metric: str, a: float, b: float) -> bool:
    """True when score ``a`` is strictly better than ``b`` under ``metric``."""
    return a > b if HIGHER_IS_BETTER[metric] else a < b


def default_metric(n_classes: int) -> str:
    return "roc_auc" if n_classes == 2 else "log_loss"
