"""Exact greedy CART regression trees stored as flat node arrays."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import InvalidConfigError, ShapeError

LEAF = -1


@dataclass
class CartTree:
    """Binary regression tree. Node 0 is the root; ``feature == -1`` marks a leaf.

    A sample goes left when ``x[feature] <= threshold``.
    """

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    depth: np.ndarray

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    @property
    def leaves(self) -> np.ndarray:
        return np.flatnonzero(self.feature == LEAF)

    @property
    def max_depth(self) -> int:
        return int(self.depth.max())

    def apply(self, X) -> np.ndarray:
        """Leaf node id reached by every row of X."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        node = np.zeros(len(X), dtype=np.intp)
        rows = np.arange(len(X))
        for _ in range(self.max_depth):
            f = self.feature[node]
            inner = f != LEAF
            if not inner.any():
                break
            go_left = X[rows[inner], f[inner]] <= self.threshold[node[inner]]
            node[inner] = np.where(go_left, self.left[node[inner]], self.right[node[inner]])
        return node

    def predict(self, X) -> np.ndarray:
        return self.value[self.apply(X)]

    def to_nodes(self) -> list[dict]:
        out = []
        for i in range(self.n_nodes):
            if self.feature[i] == LEAF:
                out.append({"id": i, "leaf": True, "value": float(self.value[i])})
            else:
                out.append({"id": i, "leaf": False, "feature": int(self.feature[i]),
                            "threshold": float(self.threshold[i]),
                            "left": int(self.left[i]), "right": int(self.right[i])})
        return out

    @classmethod
    def from_nodes(cls, nodes: list[dict]) -> "CartTree":
        n = len(nodes)
        feature = np.full(n, LEAF, dtype=np.intp)
        threshold = np.zeros(n)
        left = np.full(n, LEAF, dtype=np.intp)
        right = np.full(n, LEAF, dtype=np.intp)
        value = np.zeros(n)
        for node in nodes:
            i = int(node["id"])
            if node["leaf"]:
                value[i] = float(node["value"])
            else:
                feature[i] = int(node["feature"])
                threshold[i] = float(node["threshold"])
                left[i] = int(node["left"])
                right[i] = int(node["right"])
        depth = np.zeros(n, dtype=np.intp)
        for i in range(n):  # children always follow their parent
            if feature[i] != LEAF:
                depth[left[i]] = depth[right[i]] = depth[i] + 1
        return cls(feature, threshold, left, right, value, depth)


def presort(X) -> np.ndarray:
    """Per-feature ascending sample order, shape (n_features, n_samples)."""
    return np.argsort(np.asarray(X, dtype=float), axis=0, kind="stable").T.copy()


def _best_split(XT, r, idx, min_leaf):
    """Best (gain, feature, threshold) for the samples in ``idx``, or None.

    ``idx`` holds, per feature, the node's sample ids in ascending order of
    that feature.
    """
    F, n = idx.shape
    xs = np.take_along_axis(XT, idx, axis=1)
    rs = r[idx]
    csum = np.cumsum(rs, axis=1)
    total = csum[0, -1]
    nl = np.arange(1, n, dtype=float)
    SL = csum[:, :-1]
    SR = total - SL
    gain = SL * SL / nl + SR * SR / (n - nl) - total * total / n
    valid = xs[:, 1:] > xs[:, :-1]
    lo, hi = min_leaf - 1, n - min_leaf  # allowed positions: left size in [min_leaf, n - min_leaf]
    valid[:, :lo] = False
    valid[:, hi:] = False
    gain = np.where(valid, gain, -np.inf)
    flat = int(np.argmax(gain))  # row-major over (feature, position): lowest feature, then threshold
    f, pos = divmod(flat, n - 1)
    g = gain[f, pos]
    if not np.isfinite(g):
        return None
    a, b = xs[f, pos], xs[f, pos + 1]
    thr = a + (b - a) / 2.0
    if not a <= thr < b:
        thr = a
    return g, f, thr


def fit_regression_tree(X, residuals, max_depth=7, min_samples_leaf=5, order=None):
    """Grow a least-squares regression tree on ``residuals``.

    Splits maximize the reduction in squared error; growth stops at
    ``max_depth``, when a child would hold fewer than ``min_samples_leaf``
    samples, or when no split reduces the error. Leaf values are the
    residual means; boosting overwrites them.

    Returns ``(tree, leaf_of_sample)``.
    """
    X = np.asarray(X, dtype=float)
    r = np.asarray(residuals, dtype=float)
    if X.ndim != 2 or r.shape != (X.shape[0],):
        raise ShapeError("X must be (n, F) and residuals (n,)")
    if max_depth < 1 or min_samples_leaf < 1:
        raise InvalidConfigError("max_depth and min_samples_leaf must be >= 1")
    n_all = X.shape[0]
    XT = X.T
    if order is None:
        order = presort(X)

    feature, threshold, left, right, value, depth = [], [], [], [], [], []
    leaf_of = np.empty(n_all, dtype=np.intp)
    goes_left = np.zeros(n_all, dtype=bool)

    def new_node(d):
        feature.append(LEAF)
        threshold.append(0.0)
        left.append(LEAF)
        right.append(LEAF)
        value.append(0.0)
        depth.append(d)
        return len(feature) - 1

    stack = [(new_node(0), order)]
    while stack:
        node, idx = stack.pop()
        members = idx[0]
        n = members.size
        rn = r[members]
        value[node] = float(rn.mean())
        split = None
        if depth[node] < max_depth and n >= 2 * min_samples_leaf:
            dev = rn - rn.mean()
            # gains below rounding noise of the residual energy count as zero
            noise = 1e-12 * float(np.dot(rn, rn))
            if float(np.dot(dev, dev)) > noise:
                split = _best_split(XT, r, idx, min_samples_leaf)
                if split is not None and not split[0] > noise:
                    split = None
        if split is None:
            leaf_of[members] = node
            continue
        _, f, thr = split
        feature[node] = f
        threshold[node] = thr
        goes_left[members] = X[members, f] <= thr
        mask = goes_left[idx]
        n_left = int(mask[0].sum())
        li = idx[mask].reshape(idx.shape[0], n_left)
        ri = idx[~mask].reshape(idx.shape[0], n - n_left)
        lnode = new_node(depth[node] + 1)
        rnode = new_node(depth[node] + 1)
        left[node], right[node] = lnode, rnode
        stack.append((rnode, ri))
        stack.append((lnode, li))

    tree = CartTree(np.array(feature, dtype=np.intp), np.array(threshold),
                    np.array(left, dtype=np.intp), np.array(right, dtype=np.intp),
                    np.array(value), np.array(depth, dtype=np.intp))
    return tree, leaf_of


def leaf_values(tree: CartTree, leaf_of, residuals, n_classes, weights=None,
                eps=1e-10, clip=10.0) -> CartTree:
    """Set one-step Newton leaf values for multiclass boosting.

    Without ``weights`` every leaf gets
    (K-1)/K * sum(r) / (sum(|r|(1-|r|)) + eps). With per-sample
    ``weights``, ``residuals`` are the unweighted C - p and both sums are
    weighted, which is the Newton step of the weighted loss. Values are
    clipped to +-``clip``.
    """
    r = np.asarray(residuals, dtype=float)
    leaf_of = np.asarray(leaf_of)
    w = np.ones_like(r) if weights is None else np.asarray(weights, dtype=float)
    size = tree.n_nodes
    num = np.bincount(leaf_of, weights=w * r, minlength=size)
    a = np.abs(r)
    den = np.bincount(leaf_of, weights=w * a * (1.0 - a), minlength=size)
    counts = np.bincount(leaf_of, minlength=size)
    leaves = tree.leaves
    if np.any(counts[leaves] == 0):
        raise AssertionError("empty leaf region")
    vals = tree.value.copy()
    K = n_classes
    vals[leaves] = np.clip((K - 1) / K * num[leaves] / (den[leaves] + eps), -clip, clip)
    return CartTree(tree.feature, tree.threshold, tree.left, tree.right, vals, tree.depth)
