"""ADASYN adaptive synthetic oversampling for multi-class state data.

Minority samples surrounded by other classes get more synthetic neighbours.
A class is oversampled when the majority count exceeds ``alpha`` times its
own count; synthetic points lie on segments between same-class originals.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

from .errors import EmptyClassError, InvalidConfigError, ShapeError

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class AdasynConfig:
    alpha: float = 1.2
    beta: float = 1.0
    neighbors: int = 5
    seed: int = 0

    def __post_init__(self):
        if not self.alpha > 1:
            raise InvalidConfigError("imbalance threshold alpha must be > 1")
        if not 0 <= self.beta <= 1:
            raise InvalidConfigError("beta must lie in [0, 1]")
        if self.neighbors < 1:
            raise InvalidConfigError("neighbors must be >= 1")


@dataclass(frozen=True)
class BalancedDataset:
    """Originals first (unchanged, input order), then synthetic records.

    ``source_index``/``neighbor_index`` refer to rows of the original input
    and are -1 for originals, as is ``eta`` (nan).
    """

    X: np.ndarray
    y: np.ndarray
    synthetic: np.ndarray
    source_index: np.ndarray
    neighbor_index: np.ndarray
    eta: np.ndarray

    @property
    def n_original(self) -> int:
        return int(np.sum(~self.synthetic))

    @property
    def n_synthetic(self) -> int:
        return int(np.sum(self.synthetic))


def imbalance_degree(class_counts) -> float:
    c = np.asarray(list(class_counts.values()) if isinstance(class_counts, dict)
                   else class_counts)
    if c.size < 2:
        raise ShapeError("need at least 2 classes")
    if np.any(c < 1):
        raise EmptyClassError("every class needs at least one record")
    return float(c.max() / c.min())


def synthesis_budget(majority_count: int, minority_count: int, beta: float = 1.0) -> int:
    return int(round((majority_count - minority_count) * beta))


def _knn(X, queries, k):
    """Indices of the k nearest rows of X per query row, self excluded.

    Ties in distance resolve to the lower row index.
    """
    d = cdist(X[queries], X, "sqeuclidean")
    d[np.arange(len(queries)), queries] = np.inf
    return np.argsort(d, axis=1, kind="stable")[:, :k]


def neighbor_ratios(X, y, minority_class, neighbors: int = 5):
    """Normalized share of other-class points among each minority sample's K neighbours.

    Returns ``(r_hat, r, neighbour_indices)``; minority rows are taken in
    input order. Falls back to uniform weights when no minority sample has
    a foreign neighbour.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y)
    if neighbors >= len(X):
        raise InvalidConfigError(f"neighbors ({neighbors}) must be < dataset size ({len(X)})")
    idx = np.flatnonzero(y == minority_class)
    if idx.size == 0:
        raise EmptyClassError(f"class {minority_class!r} has no samples")
    nn = _knn(X, idx, neighbors)
    r = np.sum(y[nn] != minority_class, axis=1) / neighbors
    total = r.sum()
    r_hat = r / total if total > 0 else np.full(idx.size, 1.0 / idx.size)
    return r_hat, r, nn


def per_sample_counts(r_hat, G: int) -> np.ndarray:
    """Integer g_i ~ r_hat_i * G with largest-remainder rounding so sum(g) == G."""
    r_hat = np.asarray(r_hat, dtype=float)
    raw = r_hat * G
    g = np.floor(raw).astype(int)
    short = int(G - g.sum())
    order = np.argsort(-(raw - g), kind="stable")
    g[order[:short]] += 1
    return g


def synthesize_sample(x_i, x_zi, eta: float) -> np.ndarray:
    a = np.asarray(x_i, dtype=float)
    b = np.asarray(x_zi, dtype=float)
    if a.shape != b.shape:
        raise ShapeError("parents must have equal dimensions")
    return a + (b - a) * eta


def balance_dataset(X, y, config: AdasynConfig = AdasynConfig()) -> BalancedDataset:
    X = np.asarray(X, dtype=float)
    y = np.asarray(y)
    if X.ndim != 2 or len(X) != len(y):
        raise ShapeError("X must be (n, F) with one label per row")
    classes, counts = np.unique(y, return_counts=True)
    if classes.size < 2:
        raise ShapeError("need at least 2 classes")
    K = config.neighbors
    if K >= len(X):
        raise InvalidConfigError(f"neighbors ({K}) must be < dataset size ({len(X)})")

    # canonical lexicographic order makes the result independent of input order
    canon = np.lexsort(X.T[::-1])
    Xc, yc = X[canon], y[canon]
    majority = counts.max()

    new_x, new_y, src, nbr, etas = [], [], [], [], []
    for ci, (c, n_c) in enumerate(zip(classes, counts)):
        if majority / n_c <= config.alpha:
            continue
        if n_c < 2:
            log.warning("class %r has %d sample(s); cannot oversample", c, n_c)
            continue
        G = synthesis_budget(majority, n_c, config.beta)
        r_hat, _, nn = neighbor_ratios(Xc, yc, c, K)
        g = per_sample_counts(r_hat, G)
        members = np.flatnonzero(yc == c)
        for j, i in enumerate(members):
            if g[j] == 0:
                continue
            partners = nn[j][yc[nn[j]] == c]
            if partners.size == 0:
                d = np.sum((Xc[members] - Xc[i]) ** 2, axis=1)
                d[j] = np.inf
                partners = members[[int(np.argmin(d))]]
            rng = np.random.default_rng((config.seed, ci, j))
            for _ in range(g[j]):
                z = partners[rng.integers(partners.size)]
                eta = rng.random()
                new_x.append(synthesize_sample(Xc[i], Xc[z], eta))
                new_y.append(c)
                src.append(canon[i])
                nbr.append(canon[z])
                etas.append(eta)

    n_new = len(new_x)
    Xs = np.array(new_x).reshape(n_new, X.shape[1])
    return BalancedDataset(
        X=np.vstack([X, Xs]),
        y=np.concatenate([y, np.array(new_y, dtype=y.dtype)]),
        synthetic=np.concatenate([np.zeros(len(X), bool), np.ones(n_new, bool)]),
        source_index=np.concatenate([np.full(len(X), -1), np.array(src, dtype=int)]),
        neighbor_index=np.concatenate([np.full(len(X), -1), np.array(nbr, dtype=int)]),
        eta=np.concatenate([np.full(len(X), np.nan), np.array(etas)]),
    )
