"""Softmax, the class-weighted cross-entropy and its negative gradient."""

from __future__ import annotations

import numpy as np

P_MIN = 1e-15


def softmax(scores) -> np.ndarray:
    """Row-wise softmax with max-shift; accepts a vector or an (n, K) matrix."""
    f = np.asarray(scores, dtype=float)
    z = f - f.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def cs_loss(probabilities, one_hot, class_weights) -> float | np.ndarray:
    """-sum_k w_k C_k log p_k, per row for matrix input.

    Probabilities are floored at 1e-15 before the log so a zero at the true
    class yields a large finite loss.
    """
    p = np.maximum(np.asarray(probabilities, dtype=float), P_MIN)
    c = np.asarray(one_hot, dtype=float)
    w = np.asarray(class_weights, dtype=float)
    out = -(w * c * np.log(p)).sum(axis=-1)
    return float(out) if np.ndim(out) == 0 else out


def negative_gradient(one_hot, probabilities, weight_of_true_class=1.0) -> np.ndarray:
    """w_y (C_k - p_k): the negative derivative of the weighted loss wrt the scores."""
    c = np.asarray(one_hot, dtype=float)
    p = np.asarray(probabilities, dtype=float)
    w = np.asarray(weight_of_true_class, dtype=float)
    if w.ndim == 1 and c.ndim == 2:
        w = w[:, None]
    return w * (c - p)
