from __future__ import annotations

import logging

import numpy as np

from tripletkd.autodiff.tensor import Tensor, as_tensor
from tripletkd.errors import DegenerateBatchError
from tripletkd.types.models import KDTripletSet, LossDiagnostics, PairSet, Reduction, TripletSet

logger = logging.getLogger(__name__)


def contrastive_loss(pairs: PairSet, embeddings: Tensor, margin: float) -> Tensor:
    """(1/(2|P|)) sum [ l D^2 + (1-l) max(m - D, 0)^2 ] over labelled pairs."""
    if len(pairs) == 0:
        raise DegenerateBatchError("contrastive_loss needs at least one pair")
    if pairs.labels is None:
        raise ValueError("contrastive_loss needs pair labels")
    labels = np.asarray(pairs.labels, dtype=np.float64)
    if not np.isin(labels, (0.0, 1.0)).all():
        raise ValueError("pair labels must be 0 or 1")
    emb = as_tensor(embeddings)
    diff = emb[pairs.index[:, 0]] - emb[pairs.index[:, 1]]
    d2 = (diff * diff).sum(axis=-1)
    hinge = (margin - d2.sqrt()).relu()
    terms = d2 * labels + hinge * hinge * (1.0 - labels)
    return terms.sum() * (1.0 / (2 * len(pairs)))


def triplet_metric_loss(triplets: TripletSet, embeddings: Tensor, margin: float) -> Tensor:
    """sum over (a, p, n) of max(0, m + ||f_a - f_p||^2 - ||f_a - f_n||^2)."""
    if len(triplets) == 0:
        raise DegenerateBatchError("triplet_metric_loss needs at least one triplet")
    emb = as_tensor(embeddings)
    a, p, n = (emb[triplets.index[:, c]] for c in range(3))
    d_ap, d_an = a - p, a - n
    return ((d_ap * d_ap).sum(axis=-1) - (d_an * d_an).sum(axis=-1) + margin).relu().sum()


def triplet_kd_loss(
    omega: KDTripletSet,
    t: Tensor,
    s: Tensor,
    margin: float,
    diagnostics: LossDiagnostics | None = None,
    reduction: Reduction = Reduction.SUM,
) -> Tensor:
    """sum over (a, n) of max(0, m + ||t_a - s_a||^2 - ||t_a - s_n||^2).

    The teacher output is the anchor and never receives gradient. An empty set
    contributes 0 and is counted in `diagnostics`. With `Reduction.MEAN` the sum is
    divided by |Omega|.
    """
    if len(omega) == 0:
        logger.debug("empty anchor/negative set; triplet-KD term is 0 for this batch")
        if diagnostics is not None:
            diagnostics.empty_omega += 1
        return Tensor(0.0)
    t, s = as_tensor(t).detach(), as_tensor(s)
    a, n = omega.index[:, 0], omega.index[:, 1]
    anchor = t[a]
    pos, neg = anchor - s[a], anchor - s[n]
    total = ((pos * pos).sum(axis=-1) - (neg * neg).sum(axis=-1) + margin).relu().sum()
    if reduction is Reduction.MEAN:
        return total * (1.0 / len(omega))
    return total
