from collections.abc import Sequence

import numpy as np
from scipy.stats import rankdata

from app.core.exceptions import ArgumentError, UndefinedMetricError
from app.services.pem.network import clamp_probability


def _paired(a: Sequence[float] | np.ndarray, b: Sequence[bool] | np.ndarray):
    a_arr = np.asarray(a, dtype=float)
    b_arr = np.asarray(b, dtype=float)
    if a_arr.size == 0:
        raise ArgumentError("metrics need at least one prediction")
    if a_arr.shape != b_arr.shape:
        raise ArgumentError(f"length mismatch: {a_arr.shape} vs {b_arr.shape}")
    return a_arr, b_arr


def bce(
    predictions: Sequence[float] | np.ndarray, labels: Sequence[bool] | np.ndarray
) -> float:
    p, y = _paired(predictions, labels)
    p = clamp_probability(p)
    return float(np.mean(-(y * np.log(p) + (1.0 - y) * np.log1p(-p))))


def bernoulli_entropy(probabilities: Sequence[float] | np.ndarray) -> float:
    """Mean entropy of independent Bernoulli variables, in nats."""
    p = clamp_probability(np.asarray(probabilities, dtype=float))
    return float(np.mean(-(p * np.log(p) + (1.0 - p) * np.log1p(-p))))


def roc_auc(
    scores: Sequence[float] | np.ndarray, labels: Sequence[bool] | np.ndarray
) -> float:
    """Mann-Whitney form: P(a positive outscores a negative), ties count 1/2."""
    s, y = _paired(scores, labels)
    positive = y > 0.5
    n_pos = int(positive.sum())
    n_neg = len(y) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise UndefinedMetricError("ROC-AUC needs both positive and negative labels")
    ranks = rankdata(s)
    rank_sum = float(ranks[positive].sum())
    return (rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)
