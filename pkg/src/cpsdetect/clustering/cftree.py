"""Clustering features, the log-likelihood distance and CF-tree pre-clustering."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import InvalidClusterError, InvalidConfigError, ShapeError


@dataclass(frozen=True)
class ClusterFeature:
    count: float
    linear_sum: np.ndarray
    squared_sum: np.ndarray

    def __post_init__(self):
        if not self.count > 0:
            raise InvalidClusterError("cluster feature must have a positive count")

    @classmethod
    def of(cls, X, weights=None) -> "ClusterFeature":
        X = np.atleast_2d(np.asarray(X, dtype=float))
        w = np.ones(len(X)) if weights is None else np.asarray(weights, dtype=float)
        return cls(float(w.sum()), w @ X, w @ (X * X))

    def __add__(self, other: "ClusterFeature") -> "ClusterFeature":
        return ClusterFeature(self.count + other.count,
                              self.linear_sum + other.linear_sum,
                              self.squared_sum + other.squared_sum)

    @property
    def centroid(self) -> np.ndarray:
        return self.linear_sum / self.count

    @property
    def variance(self) -> np.ndarray:
        m = self.linear_sum / self.count
        return self.squared_sum / self.count - m * m

    def to_dict(self) -> dict:
        return {"count": self.count, "linear_sum": self.linear_sum.tolist(),
                "squared_sum": self.squared_sum.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "ClusterFeature":
        return cls(float(d["count"]), np.asarray(d["linear_sum"], dtype=float),
                   np.asarray(d["squared_sum"], dtype=float))


def regularizer(global_variances) -> np.ndarray:
    """Global variances floored away from zero so the log stays finite."""
    g = np.asarray(global_variances, dtype=float)
    floor = 1e-12 * max(1.0, float(g.max(initial=0.0)))
    return np.maximum(g, floor)


def zeta(count, linear_sum, squared_sum, gvar) -> np.ndarray:
    """Log-likelihood term of one or many clusters (vectorized over leading axes)."""
    count = np.asarray(count, dtype=float)
    mean = linear_sum / count[..., None]
    var = np.maximum(squared_sum / count[..., None] - mean * mean, 0.0)
    return -0.5 * count * np.log(gvar + var).sum(axis=-1)


def merge_distance(n_a, ls_a, ss_a, n_b, ls_b, ss_b, gvar) -> np.ndarray:
    """ζ_a + ζ_b - ζ_(a∪b), broadcasting over any leading axes."""
    return (zeta(n_a, ls_a, ss_a, gvar) + zeta(n_b, ls_b, ss_b, gvar)
            - zeta(n_a + n_b, ls_a + ls_b, ss_a + ss_b, gvar))


def loglik_distance(a: ClusterFeature, b: ClusterFeature, global_variances) -> float:
    """Decrease in log-likelihood caused by merging clusters ``a`` and ``b``."""
    if a.count <= 0 or b.count <= 0:
        raise InvalidClusterError("clusters must be non-empty")
    if a.linear_sum.shape != b.linear_sum.shape:
        raise ShapeError("cluster features have different dimensions")
    g = regularizer(global_variances)
    return float(merge_distance(a.count, a.linear_sum, a.squared_sum,
                                b.count, b.linear_sum, b.squared_sum, g))


@dataclass(frozen=True)
class CFTreeConfig:
    branching: int = 8
    leaf_capacity: int = 8
    threshold: float = 0.0
    max_leaf_entries: int = 256

    def __post_init__(self):
        if self.branching < 2 or self.leaf_capacity < 2:
            raise InvalidConfigError("branching and leaf capacity must be >= 2")
        if self.threshold < 0:
            raise InvalidConfigError("threshold must be >= 0")
        if self.max_leaf_entries < 1:
            raise InvalidConfigError("max_leaf_entries must be >= 1")


class _Node:
    __slots__ = ("leaf", "n", "ls", "ss", "children")

    def __init__(self, leaf, n, ls, ss, children=None):
        self.leaf = leaf
        self.n = n
        self.ls = ls
        self.ss = ss
        self.children = children

    def total(self):
        return self.n.sum(), self.ls.sum(axis=0), self.ss.sum(axis=0)


class CFTree:
    """BIRCH-style height-balanced tree of clustering features.

    Leaf entries absorb an incoming feature when their merge distance is at
    most the current threshold. When the number of leaf entries exceeds
    ``max_leaf_entries`` the threshold is raised and the tree is rebuilt
    from its own leaf entries.
    """

    def __init__(self, dim, global_variances, config: CFTreeConfig = CFTreeConfig()):
        self.dim = dim
        self.gvar = regularizer(global_variances)
        self.config = config
        self.threshold = config.threshold
        self.rebuilds = 0
        self._reset()

    def _reset(self):
        d = self.dim
        self.root = _Node(True, np.zeros(0), np.zeros((0, d)), np.zeros((0, d)))
        self.n_entries = 0

    def _dist(self, node, n, ls, ss):
        return merge_distance(node.n, node.ls, node.ss, n, ls, ss, self.gvar)

    def insert(self, n, ls, ss):
        split = self._insert(self.root, n, ls, ss)
        if split is not None:
            a, b = split
            na, la, sa = a.total()
            nb, lb, sb = b.total()
            self.root = _Node(False, np.array([na, nb]), np.vstack([la, lb]),
                              np.vstack([sa, sb]), [a, b])
        if self.n_entries > self.config.max_leaf_entries:
            self._rebuild()

    def _insert(self, node, n, ls, ss):
        if node.leaf:
            if len(node.n):
                dist = self._dist(node, n, ls, ss)
                j = int(np.argmin(dist))
                if dist[j] <= self.threshold:
                    node.n[j] += n
                    node.ls[j] += ls
                    node.ss[j] += ss
                    return None
            node.n = np.append(node.n, n)
            node.ls = np.vstack([node.ls, ls])
            node.ss = np.vstack([node.ss, ss])
            self.n_entries += 1
            if len(node.n) > self.config.leaf_capacity:
                return self._split(node)
            return None

        j = int(np.argmin(self._dist(node, n, ls, ss)))
        res = self._insert(node.children[j], n, ls, ss)
        if res is None:
            node.n[j] += n
            node.ls[j] += ls
            node.ss[j] += ss
            return None
        a, b = res
        na, la, sa = a.total()
        nb, lb, sb = b.total()
        node.children[j:j + 1] = [a, b]
        node.n = np.concatenate([node.n[:j], [na, nb], node.n[j + 1:]])
        node.ls = np.vstack([node.ls[:j], la, lb, node.ls[j + 1:]])
        node.ss = np.vstack([node.ss[:j], sa, sb, node.ss[j + 1:]])
        if len(node.n) > self.config.branching:
            return self._split(node)
        return None

    def _split(self, node):
        k = len(node.n)
        D = merge_distance(node.n[:, None], node.ls[:, None, :], node.ss[:, None, :],
                           node.n[None, :], node.ls[None, :, :], node.ss[None, :, :],
                           self.gvar)
        s1, s2 = np.unravel_index(int(np.argmax(D)), D.shape)
        s1, s2 = min(s1, s2), max(s1, s2)
        to_first = D[:, s1] <= D[:, s2]
        to_first[s1], to_first[s2] = True, False
        parts = []
        for mask in (to_first, ~to_first):
            idx = np.flatnonzero(mask)
            kids = [node.children[i] for i in idx] if not node.leaf else None
            parts.append(_Node(node.leaf, node.n[idx], node.ls[idx], node.ss[idx], kids))
        assert k == sum(len(p.n) for p in parts)
        return parts

    def leaf_entries(self):
        """All leaf entries as (n, ls, ss) arrays in left-to-right order."""
        ns, lss, sss = [], [], []
        stack = [self.root]
        while stack:
            node = stack.pop()
            if node.leaf:
                ns.append(node.n)
                lss.append(node.ls)
                sss.append(node.ss)
            else:
                stack.extend(reversed(node.children))
        d = self.dim
        if not ns:
            return np.zeros(0), np.zeros((0, d)), np.zeros((0, d))
        return np.concatenate(ns), np.vstack(lss), np.vstack(sss)

    def _leaves(self):
        out = []
        stack = [self.root]
        while stack:
            node = stack.pop()
            if node.leaf:
                out.append(node)
            else:
                stack.extend(reversed(node.children))
        return out

    def _closest_pair_distances(self):
        out = []
        for leaf in self._leaves():
            k = len(leaf.n)
            if k < 2:
                continue
            D = merge_distance(leaf.n[:, None], leaf.ls[:, None, :], leaf.ss[:, None, :],
                               leaf.n[None, :], leaf.ls[None, :, :], leaf.ss[None, :, :],
                               self.gvar)
            D[np.diag_indices(k)] = np.inf
            out.append(D.min())
        return np.array(out)

    def _rebuild(self):
        while self.n_entries > self.config.max_leaf_entries:
            if self.threshold > 0:
                new_t = 2.0 * self.threshold
            else:
                cp = self._closest_pair_distances()
                cp = cp[np.isfinite(cp)]
                new_t = float(np.median(cp)) if cp.size else 0.0
                if new_t <= 0:
                    new_t = float(cp[cp > 0].min()) if np.any(cp > 0) else 1e-12
            self.threshold = new_t
            self.rebuilds += 1
            n, ls, ss = self.leaf_entries()
            self._reset()
            for i in range(len(n)):
                split = self._insert(self.root, n[i], ls[i], ss[i])
                if split is not None:
                    a, b = split
                    na, la, sa = a.total()
                    nb, lb, sb = b.total()
                    self.root = _Node(False, np.array([na, nb]), np.vstack([la, lb]),
                                      np.vstack([sa, sb]), [a, b])

    def compact_leaves(self):
        """Merge entries sharing a leaf while any pair is within the threshold."""
        for leaf in self._leaves():
            while len(leaf.n) > 1:
                k = len(leaf.n)
                D = merge_distance(leaf.n[:, None], leaf.ls[:, None, :], leaf.ss[:, None, :],
                                   leaf.n[None, :], leaf.ls[None, :, :], leaf.ss[None, :, :],
                                   self.gvar)
                D[np.diag_indices(k)] = np.inf
                flat = int(np.argmin(D))
                i, j = divmod(flat, k)
                if D[i, j] > self.threshold:
                    break
                i, j = min(i, j), max(i, j)
                leaf.n[i] += leaf.n[j]
                leaf.ls[i] += leaf.ls[j]
                leaf.ss[i] += leaf.ss[j]
                keep = np.arange(k) != j
                leaf.n, leaf.ls, leaf.ss = leaf.n[keep], leaf.ls[keep], leaf.ss[keep]
                self.n_entries -= 1


def build_cftree(X, config: CFTreeConfig = CFTreeConfig(), weights=None,
                 global_variances=None, return_tree=False):
    """Pre-cluster the rows of ``X`` into CF-tree leaf entries.

    ``global_variances`` defaults to the (weighted) population variance of
    ``X``. Returns the list of sub-cluster features, or ``(list, tree)`` when
    ``return_tree`` is set.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[0] < 1:
        raise InvalidClusterError("CF-tree needs at least one record")
    w = np.ones(len(X)) if weights is None else np.asarray(weights, dtype=float)
    if w.shape != (len(X),):
        raise ShapeError("one weight per record required")
    if global_variances is None:
        global_variances = weighted_variance(X, w)
    tree = CFTree(X.shape[1], global_variances, config)
    XX = X * X
    for i in range(len(X)):
        tree.insert(w[i], X[i] * w[i], XX[i] * w[i])
    tree.compact_leaves()
    n, ls, ss = tree.leaf_entries()
    subs = [ClusterFeature(float(n[i]), ls[i].copy(), ss[i].copy()) for i in range(len(n))]
    return (subs, tree) if return_tree else subs


def weighted_variance(X, w) -> np.ndarray:
    total = w.sum()
    mean = w @ X / total
    return w @ ((X - mean) ** 2) / total
