from .cftree import CFTree, CFTreeConfig, ClusterFeature, build_cftree, loglik_distance
from .pca import PcaModel, pca_fit, pca_inverse, pca_transform
from .twostep import (
    ClusterModel,
    MergeStep,
    Selection,
    TwoStepConfig,
    assign_labels,
    cluster,
    select_cluster_count,
)

__all__ = [
    "CFTree", "CFTreeConfig", "ClusterFeature", "ClusterModel", "MergeStep", "PcaModel",
    "Selection", "TwoStepConfig", "assign_labels", "build_cftree", "cluster",
    "loglik_distance", "pca_fit", "pca_inverse", "pca_transform", "select_cluster_count",
]
