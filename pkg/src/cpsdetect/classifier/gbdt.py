"""Cost-sensitive multiclass gradient-boosted decision trees."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from ..errors import InvalidConfigError, MissingClassError, ShapeError
from .loss import cs_loss, softmax
from .tree import CartTree, fit_regression_tree, leaf_values, presort

ATTACK_LABELS = ("S2", "S3", "S4")


@dataclass(frozen=True)
class CostModel:
    """Per-class loss weights plus the binary miss/false-alarm costs.

    ``miss_weight`` prices an attack reported as normal and
    ``false_alarm_weight`` the reverse; they set the binary alarm threshold
    used when attack-vs-normal is reported.
    """

    class_weights: tuple[float, ...]
    miss_weight: float = 3.0
    false_alarm_weight: float = 1.0

    def __post_init__(self):
        w = np.asarray(self.class_weights, dtype=float)
        if w.size == 0 or not np.all(np.isfinite(w)) or np.any(w <= 0):
            raise InvalidConfigError("class weights must be finite and > 0")
        for v in (self.miss_weight, self.false_alarm_weight):
            if not (np.isfinite(v) and v > 0):
                raise InvalidConfigError("miss and false-alarm weights must be finite and > 0")

    @property
    def decision_threshold(self) -> float:
        return self.miss_weight / (self.false_alarm_weight + self.miss_weight)

    @classmethod
    def for_labels(cls, labels: Sequence[str], attack_weight: float = 3.0,
                   attack_labels=ATTACK_LABELS, **kw) -> "CostModel":
        ws = tuple(float(attack_weight) if lab in attack_labels else 1.0 for lab in labels)
        return cls(ws, **kw)

    @classmethod
    def uniform(cls, n_classes: int) -> "CostModel":
        return cls((1.0,) * n_classes)


@dataclass(frozen=True)
class TrainConfig:
    n_iterations: int = 130
    max_depth: int = 7
    shrinkage: float = 0.1
    min_samples_leaf: int = 5
    seed: int = 0

    def __post_init__(self):
        if self.n_iterations < 0:
            raise InvalidConfigError("n_iterations must be >= 0")
        if self.max_depth < 1:
            raise InvalidConfigError("max_depth must be >= 1")
        if not 0 < self.shrinkage <= 1:
            raise InvalidConfigError("shrinkage must lie in (0, 1]")
        if self.min_samples_leaf < 1:
            raise InvalidConfigError("min_samples_leaf must be >= 1")


@dataclass
class GbdtEnsemble:
    classes: tuple[str, ...]
    n_features: int
    config: TrainConfig
    cost: CostModel
    trees: list[list[CartTree]] = field(default_factory=list)  # [iteration][class]
    loss_trace: list[float] = field(default_factory=list)

    @property
    def n_classes(self) -> int:
        return len(self.classes)

    def _check(self, X):
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X[None, :]
        if X.ndim != 2 or X.shape[1] != self.n_features:
            raise ShapeError(f"expected {self.n_features} features, got shape {X.shape}")
        return X

    def predict_scores(self, X) -> np.ndarray:
        X = self._check(X)
        F = np.zeros((len(X), self.n_classes))
        nu = self.config.shrinkage
        for row in self.trees:
            for k, tree in enumerate(row):
                F[:, k] += nu * tree.predict(X)
        return F

    def predict_proba(self, X) -> np.ndarray:
        return softmax(self.predict_scores(X))

    def predict_index(self, X) -> np.ndarray:
        return np.argmax(self.predict_proba(X), axis=1)

    def predict(self, X) -> np.ndarray:
        return np.asarray(self.classes, dtype=object)[self.predict_index(X)]

    def to_dict(self) -> dict:
        return {
            "format": "cs-gbdt",
            "classes": list(self.classes),
            "n_features": self.n_features,
            "config": asdict(self.config),
            "cost": {"class_weights": list(self.cost.class_weights),
                     "miss_weight": self.cost.miss_weight,
                     "false_alarm_weight": self.cost.false_alarm_weight},
            "loss_trace": list(self.loss_trace),
            "trees": [[t.to_nodes() for t in row] for row in self.trees],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GbdtEnsemble":
        config = TrainConfig(**d["config"])
        c = d["cost"]
        cost = CostModel(tuple(c["class_weights"]), c["miss_weight"], c["false_alarm_weight"])
        classes = tuple(d["classes"])
        trees = [[CartTree.from_nodes(t) for t in row] for row in d["trees"]]
        if len(trees) != config.n_iterations or any(len(row) != len(classes) for row in trees):
            raise InvalidConfigError(
                f"incomplete tree grid: expected {config.n_iterations}x{len(classes)}")
        if len(cost.class_weights) != len(classes):
            raise InvalidConfigError("cost model does not match the class count")
        return cls(classes, int(d["n_features"]), config, cost, trees,
                   list(d.get("loss_trace", [])))


def encode_labels(y, classes=None):
    y = np.asarray(y)
    if classes is None:
        classes = tuple(sorted({str(v) for v in y.tolist()}))
    lookup = {c: i for i, c in enumerate(classes)}
    try:
        codes = np.array([lookup[str(v)] for v in y.tolist()], dtype=np.intp)
    except KeyError as exc:
        raise MissingClassError(f"label {exc.args[0]!r} not in class list") from None
    return tuple(classes), codes


def train(X, y, config: TrainConfig = TrainConfig(), cost: CostModel | None = None,
          classes: Sequence[str] | None = None, callback=None) -> GbdtEnsemble:
    """Fit the cost-sensitive boosted ensemble.

    Each iteration computes softmax probabilities from the current scores,
    fits one regression tree per class to the weighted negative gradients,
    sets Newton leaf values and adds them with shrinkage. ``loss_trace``
    holds the mean weighted loss before the first and after every iteration.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or len(X) != len(y):
        raise ShapeError("X must be (n, F) with one label per row")
    classes, codes = encode_labels(y, None if classes is None else tuple(classes))
    K = len(classes)
    if K < 2:
        raise MissingClassError("need at least two classes")
    missing = set(range(K)) - set(np.unique(codes).tolist())
    if missing:
        raise MissingClassError("classes absent from training data: "
                                + ", ".join(classes[i] for i in sorted(missing)))
    if cost is None:
        cost = CostModel.for_labels(classes)
    if len(cost.class_weights) != K:
        raise InvalidConfigError("cost model must give one weight per class")

    n = len(X)
    Y = np.zeros((n, K))
    Y[np.arange(n), codes] = 1.0
    wk = np.asarray(cost.class_weights, dtype=float)
    w = wk[codes]
    nu = config.shrinkage
    order = presort(X)

    model = GbdtEnsemble(classes, X.shape[1], config, cost)
    F = np.zeros((n, K))
    model.loss_trace.append(float(cs_loss(softmax(F), Y, wk).mean()))
    for it in range(config.n_iterations):
        P = softmax(F)
        U = Y - P
        R = w[:, None] * U
        row = []
        for k in range(K):
            tree, leaf_of = fit_regression_tree(X, R[:, k], config.max_depth,
                                                config.min_samples_leaf, order=order)
            tree = leaf_values(tree, leaf_of, U[:, k], K, weights=w)
            F[:, k] += nu * tree.value[leaf_of]
            row.append(tree)
        model.trees.append(row)
        model.loss_trace.append(float(cs_loss(softmax(F), Y, wk).mean()))
        if callback is not None:
            callback(it, model.loss_trace[-1])
    return model
