"""Principal component projection via eigendecomposition of the covariance."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import InsufficientDataError, InvalidTargetError, ShapeError


@dataclass(frozen=True)
class PcaModel:
    mean: np.ndarray
    components: np.ndarray  # (m, n), rows sorted by eigenvalue descending
    eigenvalues: np.ndarray

    @property
    def n_components(self) -> int:
        return self.components.shape[0]

    def to_dict(self) -> dict:
        return {
            "mean": self.mean.tolist(),
            "components": self.components.tolist(),
            "eigenvalues": self.eigenvalues.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PcaModel":
        return cls(
            np.asarray(d["mean"], dtype=float),
            np.atleast_2d(np.asarray(d["components"], dtype=float)),
            np.asarray(d["eigenvalues"], dtype=float),
        )


def pca_fit(X, n_components: int | None = None, variance: float | None = None,
            weights=None) -> PcaModel:
    """Fit a PCA model.

    Give either ``n_components`` or a cumulative ``variance`` fraction; with
    neither, 95% of the variance is retained. Optional per-record
    ``weights`` act as frequency weights (repeat counts).
    """
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise ShapeError("X must be a 2-D array")
    n, d = X.shape
    if n < 2:
        raise InsufficientDataError("PCA needs at least 2 records")
    if d < 1:
        raise ShapeError("PCA needs at least 1 feature")
    if not np.all(np.isfinite(X)):
        raise ValueError("X contains non-finite values")
    if n_components is not None and variance is not None:
        raise InvalidTargetError("give n_components or variance, not both")

    if weights is None:
        w = np.ones(n)
    else:
        w = np.asarray(weights, dtype=float)
        if w.shape != (n,) or np.any(w <= 0):
            raise ShapeError("weights must be positive, one per record")
    total = w.sum()
    mean = w @ X / total
    Xc = X - mean
    cov = (Xc * w[:, None]).T @ Xc / (total - 1.0)

    vals, vecs = np.linalg.eigh(cov)
    order = np.argsort(-vals, kind="stable")
    vals = np.clip(vals[order], 0.0, None)
    vecs = vecs[:, order].T
    # fix the sign so the largest-magnitude loading of each component is positive
    pivot = np.argmax(np.abs(vecs), axis=1)
    signs = np.sign(vecs[np.arange(d), pivot])
    signs[signs == 0] = 1.0
    vecs = vecs * signs[:, None]

    if n_components is not None:
        if not 1 <= n_components <= d:
            raise InvalidTargetError(f"n_components must lie in [1, {d}]")
        m = n_components
    else:
        frac = 0.95 if variance is None else variance
        if not 0 < frac <= 1:
            raise InvalidTargetError("variance fraction must lie in (0, 1]")
        tot = vals.sum()
        if tot <= 0:
            m = 1
        else:
            csum = np.cumsum(vals)
            m = int(np.searchsorted(csum, frac * tot - 1e-12 * tot) + 1)
            m = min(m, d)
    return PcaModel(mean=mean, components=vecs[:m].copy(), eigenvalues=vals[:m].copy())


def pca_transform(model: PcaModel, X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[None, :]
    if X.shape[1] != model.mean.shape[0]:
        raise ShapeError(f"expected {model.mean.shape[0]} columns, got {X.shape[1]}")
    return (X - model.mean) @ model.components.T


def pca_inverse(model: PcaModel, Z) -> np.ndarray:
    Z = np.atleast_2d(np.asarray(Z, dtype=float))
    return Z @ model.components + model.mean


def noise_floor_components(eigenvalues, n_records: int, factor: float = 1.25) -> int:
    """Count eigenvalues standing clear of the isotropic-noise bulk.

    Pure-noise sample eigenvalues spread over roughly
    [s(1 - c)^2, s(1 + c)^2] with c = sqrt(d/N). The noise level s is read off
    the smallest eigenvalue, and only eigenvalues above ``factor`` times the
    upper edge count as signal.
    """
    ev = np.asarray(eigenvalues, dtype=float)
    c = np.sqrt(ev.size / n_records)
    lower = max((1.0 - c) ** 2, 1e-3)
    noise = ev.min() / lower
    if noise <= 0:
        return int(np.sum(ev > 0))
    return int(np.sum(ev > factor * noise * (1.0 + c) ** 2))
