"""Riemannian lane geometry.

SPD-manifold statistics, Gaussian and group-valued lane descriptors, tubular
lane losses and evaluation, and road-surface regularity checks.
"""

__version__ = "0.1.0"

from .descriptor import (
    DescriptorConfig,
    RiemannianGaussianDescriptor,
    feature_descriptor,
    lane_descriptor,
    lane_features,
)
from .exceptions import LaneManifoldError
from .gaussian import GaussianCluster, GaussianEmbedding, fit_gaussian, gauss_to_spd, kmeans
from .group import GroupElement, descriptor, group_compose, group_embed, group_identity, group_inverse
from .lanes import AnchorFeatures, Lane, LaneSet, PositionWeightedConv, gated_fusion, pw_conv
from .objectives import f1_evaluate, gradcheck, slice_iou, tliou_loss, total_loss
from .riemann import (
    KarcherResult,
    RiemannianStatistics,
    TangentVector,
    airm_distance,
    airm_inner,
    exp_map,
    karcher_mean,
    log_map,
    parallel_transport,
    riem_stats,
    tangent_covariance,
)
from .symmat import mat_exp, mat_log, smat, svec, sym_eig
from .weights import WeightBundle, init_weights

__all__ = [
    "AnchorFeatures",
    "DescriptorConfig",
    "GaussianCluster",
    "GaussianEmbedding",
    "GroupElement",
    "KarcherResult",
    "Lane",
    "LaneManifoldError",
    "LaneSet",
    "PositionWeightedConv",
    "RiemannianGaussianDescriptor",
    "RiemannianStatistics",
    "TangentVector",
    "WeightBundle",
    "airm_distance",
    "airm_inner",
    "descriptor",
    "exp_map",
    "f1_evaluate",
    "feature_descriptor",
    "fit_gaussian",
    "gated_fusion",
    "gauss_to_spd",
    "gradcheck",
    "group_compose",
    "group_embed",
    "group_identity",
    "group_inverse",
    "init_weights",
    "karcher_mean",
    "kmeans",
    "lane_descriptor",
    "lane_features",
    "log_map",
    "mat_exp",
    "mat_log",
    "parallel_transport",
    "pw_conv",
    "riem_stats",
    "slice_iou",
    "smat",
    "svec",
    "sym_eig",
    "tangent_covariance",
    "tliou_loss",
    "total_loss",
]
