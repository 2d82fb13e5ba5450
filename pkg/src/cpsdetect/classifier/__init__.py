from .gbdt import CostModel, GbdtEnsemble, TrainConfig, encode_labels, train
from .loss import cs_loss, negative_gradient, softmax
from .tree import CartTree, fit_regression_tree, leaf_values

__all__ = [
    "CartTree", "CostModel", "GbdtEnsemble", "TrainConfig", "cs_loss", "encode_labels",
    "fit_regression_tree", "leaf_values", "negative_gradient", "softmax", "train",
]
