"""Two-step clustering: PCA, CF-tree pre-clustering, BIC/R(k) model selection
by agglomerative merging, and single-point assignment of every record."""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field

import numpy as np

from ..datalink import StateDataLink
from ..errors import InvalidConfigError, ShapeError
from .cftree import (
    CFTreeConfig,
    ClusterFeature,
    build_cftree,
    merge_distance,
    regularizer,
    weighted_variance,
    zeta,
)
from .pca import PcaModel, noise_floor_components, pca_fit, pca_transform

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TwoStepConfig:
    n_components: int | None = None
    variance: float | None = None
    noise_factor: float = 1.25
    min_components: int = 2
    branching: int = 8
    leaf_capacity: int = 8
    threshold: float = 0.0
    max_leaf_entries: int = 256
    k_max: int = 15
    bic_ratio: float = 0.04
    min_ratio: float = 3.0
    outlier_sigma: float = 3.0

    def __post_init__(self):
        if self.k_max < 2:
            raise InvalidConfigError("k_max must be >= 2")
        if self.bic_ratio <= 0:
            raise InvalidConfigError("bic_ratio must be > 0")

    def cftree(self) -> CFTreeConfig:
        return CFTreeConfig(self.branching, self.leaf_capacity, self.threshold,
                            self.max_leaf_entries)


@dataclass(frozen=True)
class MergeStep:
    distance: float
    pair: tuple[int, int]


@dataclass(frozen=True)
class Selection:
    k: int
    merge_trace: list[MergeStep]
    bic: dict[int, float]
    ratios: dict[int, float]
    candidates: list[int]
    assignment: np.ndarray  # sub-cluster -> cluster index at k


@dataclass
class ClusterModel:
    k: int
    clusters: list[ClusterFeature]
    global_variances: np.ndarray
    labels: np.ndarray
    outlier_flags: np.ndarray
    merge_trace: list[MergeStep]
    pca: PcaModel | None = None
    threshold: float = 0.0
    outlier_cutoff: float = np.inf
    n_subclusters: int = 0
    bic: dict[int, float] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "clusters": [c.to_dict() for c in self.clusters],
            "global_variances": self.global_variances.tolist(),
            "labels": self.labels.tolist(),
            "outlier_flags": [bool(f) for f in self.outlier_flags],
            "merge_trace": [[m.distance, list(m.pair)] for m in self.merge_trace],
            "pca": self.pca.to_dict() if self.pca is not None else None,
            "threshold": self.threshold,
            "outlier_cutoff": self.outlier_cutoff if np.isfinite(self.outlier_cutoff) else None,
            "n_subclusters": self.n_subclusters,
            "bic": {str(k): v for k, v in self.bic.items()},
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ClusterModel":
        cut = d.get("outlier_cutoff")
        return cls(
            k=int(d["k"]),
            clusters=[ClusterFeature.from_dict(c) for c in d["clusters"]],
            global_variances=np.asarray(d["global_variances"], dtype=float),
            labels=np.asarray(d["labels"], dtype=int),
            outlier_flags=np.asarray(d["outlier_flags"], dtype=bool),
            merge_trace=[MergeStep(float(m[0]), (int(m[1][0]), int(m[1][1])))
                         for m in d["merge_trace"]],
            pca=PcaModel.from_dict(d["pca"]) if d.get("pca") else None,
            threshold=float(d.get("threshold", 0.0)),
            outlier_cutoff=np.inf if cut is None else float(cut),
            n_subclusters=int(d.get("n_subclusters", 0)),
            bic={int(k): float(v) for k, v in d.get("bic", {}).items()},
        )


def _stack(cfs):
    n = np.array([c.count for c in cfs], dtype=float)
    ls = np.vstack([c.linear_sum for c in cfs])
    ss = np.vstack([c.squared_sum for c in cfs])
    return n, ls, ss


def agglomerate(subclusters, global_variances):
    """Merge sub-clusters pairwise down to one cluster.

    Returns the merge trace and the total ζ after each merge; index ``J`` of
    the returned ζ list holds the value for the J-cluster solution. The
    surviving cluster of a merge keeps the lower index.
    """
    g = regularizer(global_variances)
    n, ls, ss = _stack(subclusters)
    ls, ss = ls.copy(), ss.copy()
    S = len(n)
    z = zeta(n, ls, ss, g)
    D = merge_distance(n[:, None], ls[:, None, :], ss[:, None, :],
                       n[None, :], ls[None, :, :], ss[None, :, :], g)
    D[np.diag_indices(S)] = np.inf
    active = np.ones(S, dtype=bool)
    zsum = {S: float(z.sum())}
    trace = []
    for J in range(S - 1, 0, -1):
        flat = int(np.argmin(D))
        i, j = divmod(flat, S)
        i, j = min(i, j), max(i, j)
        trace.append(MergeStep(float(D[i, j]), (i, j)))
        n[i] += n[j]
        ls[i] += ls[j]
        ss[i] += ss[j]
        active[j] = False
        D[j, :] = np.inf
        D[:, j] = np.inf
        z[i] = zeta(n[i], ls[i], ss[i], g)
        z[j] = 0.0
        row = merge_distance(n[i], ls[i], ss[i], n, ls, ss, g)
        row[~active] = np.inf
        row[i] = np.inf
        D[i, :] = row
        D[:, i] = row
        zsum[J] = float(z[active].sum())
    return trace, zsum


def _assignment_at(S, trace, k):
    """Map each sub-cluster to its cluster index in the k-cluster solution."""
    parent = np.arange(S)
    for step in trace[:S - k]:
        i, j = step.pair
        parent[parent == j] = i
    roots = sorted(set(parent.tolist()))
    remap = {r: c for c, r in enumerate(roots)}
    return np.array([remap[p] for p in parent])


def select_cluster_count(subclusters, k_max=15, global_variances=None, total_count=None,
                         bic_ratio=0.04, min_ratio=3.0) -> Selection:
    """Choose the cluster count by a BIC coarse estimate refined with R(k).

    ``d_min(C_k)`` is the smallest pairwise distance in the k-cluster
    solution, i.e. the distance of the merge that takes k clusters to k-1.
    """
    S = len(subclusters)
    if S < 2:
        return Selection(1, [], {}, {}, [1], np.zeros(S, dtype=int))
    if k_max < 2:
        raise InvalidConfigError("k_max must be >= 2")
    n, ls, ss = _stack(subclusters)
    if global_variances is None:
        N = n.sum()
        mean = ls.sum(axis=0) / N
        global_variances = np.maximum(ss.sum(axis=0) / N - mean * mean, 0.0)
    N = float(n.sum()) if total_count is None else float(total_count)
    d = ls.shape[1]

    trace, zsum = agglomerate(subclusters, global_variances)
    bic = {J: -2.0 * zsum[J] + J * 2 * d * np.log(N) for J in zsum}
    # dmin[k]: smallest pairwise distance in the k-cluster solution (merge k -> k-1)
    dmin = {S - t: step.distance for t, step in enumerate(trace)}

    upper = min(k_max, S)
    # changes are measured relative to the first one, BIC(2) - BIC(1)
    scale = abs(bic[2] - bic[1])
    J0 = upper
    for J in range(1, upper):
        if bic[J + 1] - bic[J] >= -bic_ratio * scale:
            J0 = J
            break
    candidates = list(range(2, min(max(J0 + 1, 2), upper) + 1))
    ratios = {}
    for k in candidates:
        num = dmin[k]
        den = dmin.get(k + 1)
        if den is None:
            ratios[k] = 1.0
        elif den > 0:
            ratios[k] = num / den
        else:
            ratios[k] = np.inf if num > 0 else 1.0
    best = max(candidates, key=lambda k: (ratios[k], -k))
    if ratios[best] < min_ratio:
        best = 1
    return Selection(best, trace, bic, ratios, candidates, _assignment_at(S, trace, best))


def single_point_distances(clusters, X, global_variances, chunk=2048) -> np.ndarray:
    """Distance of every row of X, as a one-point cluster, to each cluster."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    g = regularizer(global_variances)
    n, ls, ss = _stack(clusters)
    if X.shape[1] != ls.shape[1]:
        raise ShapeError(f"expected {ls.shape[1]} columns, got {X.shape[1]}")
    out = np.empty((len(X), len(n)))
    for s in range(0, len(X), chunk):
        x = X[s:s + chunk, None, :]
        out[s:s + chunk] = merge_distance(1.0, x, x * x, n[None, :], ls[None], ss[None], g)
    return out


def assign_labels(model: ClusterModel, X, outlier_sigma=3.0):
    """Nearest-cluster labels plus outlier flags for the rows of ``X``.

    A record is an outlier when its distance to the nearest cluster exceeds
    the mean plus ``outlier_sigma`` standard deviations of those distances.
    Returns ``(labels, outlier_flags, cutoff)``.
    """
    if model.k < 1 or not model.clusters:
        raise InvalidConfigError("model has no clusters")
    D = single_point_distances(model.clusters, X, model.global_variances)
    labels = np.argmin(D, axis=1)
    best = D[np.arange(len(D)), labels]
    sd = best.std()
    cutoff = best.mean() + outlier_sigma * sd if sd > 0 else np.inf
    return labels, best > cutoff, cutoff


def _reduced(data, weights):
    if isinstance(data, StateDataLink):
        X = data.features()
        if weights is None:
            weights = data.weights()
    else:
        X = np.asarray(data, dtype=float)
    if weights is None:
        weights = np.ones(len(X))
    return X, np.asarray(weights, dtype=float)


def fit_projection(X, config: TwoStepConfig, weights=None):
    """PCA model for clustering plus the number of above-noise components.

    With neither ``n_components`` nor ``variance`` configured, components are
    kept while their eigenvalue clears the noise floor (at least
    ``min_components``).
    """
    if config.n_components is not None:
        pca = pca_fit(X, n_components=config.n_components, weights=weights)
        return pca, pca.n_components
    if config.variance is not None:
        pca = pca_fit(X, variance=config.variance, weights=weights)
        return pca, pca.n_components
    full = pca_fit(X, n_components=X.shape[1], weights=weights)
    signal = noise_floor_components(full.eigenvalues, len(X), config.noise_factor)
    m = max(signal, min(config.min_components, X.shape[1]))
    pca = PcaModel(full.mean, full.components[:m].copy(), full.eigenvalues[:m].copy())
    return pca, signal


def cluster(data, config: TwoStepConfig = TwoStepConfig(), weights=None) -> ClusterModel:
    """Run the full two-step PCA clustering on a link or a feature matrix.

    Repeat counts of a :class:`StateDataLink` are used as record weights.
    Data with no component above the noise floor is a single cluster.
    """
    X, w = _reduced(data, weights)
    pca, signal = fit_projection(X, config, w)
    Z = pca_transform(pca, X)
    gvar = weighted_variance(Z, w)
    subs, tree = build_cftree(Z, config.cftree(), weights=w, global_variances=gvar,
                              return_tree=True)
    log.info("CF-tree: %d sub-clusters, threshold %.6g, %d rebuilds",
             len(subs), tree.threshold, tree.rebuilds)
    sel = select_cluster_count(subs, config.k_max, gvar, total_count=w.sum(),
                               bic_ratio=config.bic_ratio, min_ratio=config.min_ratio)
    k = sel.k
    assignment = sel.assignment
    if signal == 0 and k > 1:
        log.info("no component above the noise floor; using a single cluster")
        k = 1
        assignment = np.zeros(len(subs), dtype=int)
    prelim = [None] * k
    for s, c in enumerate(assignment):
        prelim[c] = subs[s] if prelim[c] is None else prelim[c] + subs[s]
    model = ClusterModel(k, prelim, gvar, np.zeros(len(Z), dtype=int),
                         np.zeros(len(Z), dtype=bool), sel.merge_trace, pca,
                         threshold=tree.threshold, n_subclusters=len(subs), bic=sel.bic)
    labels, outliers, cutoff = assign_labels(model, Z, config.outlier_sigma)
    final = []
    for c in range(k):
        m = (labels == c) & ~outliers
        final.append(ClusterFeature.of(Z[m], w[m]) if m.any() else prelim[c])
    model.clusters = final
    model.labels = labels
    model.outlier_flags = outliers
    model.outlier_cutoff = cutoff
    return model


def config_dict(config: TwoStepConfig) -> dict:
    return asdict(config)
