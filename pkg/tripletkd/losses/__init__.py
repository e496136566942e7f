from tripletkd.losses.combined import BatchOutputs, LossBreakdown, combined_loss
from tripletkd.losses.metric import contrastive_loss, triplet_kd_loss, triplet_metric_loss
from tripletkd.losses.pointwise import bkd_loss, cross_entropy_loss, hkd_loss, kl_divergence
from tripletkd.losses.relational import (
    huber,
    pairwise_distance,
    psi_angle,
    psi_distance,
    rkd_a_loss,
    rkd_d_loss,
    rkd_da_loss,
)

__all__ = [
    "BatchOutputs",
    "LossBreakdown",
    "bkd_loss",
    "combined_loss",
    "contrastive_loss",
    "cross_entropy_loss",
    "hkd_loss",
    "huber",
    "kl_divergence",
    "pairwise_distance",
    "psi_angle",
    "psi_distance",
    "rkd_a_loss",
    "rkd_d_loss",
    "rkd_da_loss",
    "triplet_kd_loss",
    "triplet_metric_loss",
]
