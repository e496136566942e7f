from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from tripletkd.autodiff.tensor import Tensor
from tripletkd.losses.metric import contrastive_loss, triplet_kd_loss, triplet_metric_loss
from tripletkd.losses.pointwise import bkd_loss, cross_entropy_loss, hkd_loss
from tripletkd.losses.relational import rkd_a_loss, rkd_d_loss
from tripletkd.nn.layers import softmax
from tripletkd.types.config import LossSpec
from tripletkd.types.models import (
    KDTripletSet,
    LossDiagnostics,
    LossKind,
    PairSet,
    SoftOutputs,
    TripletSet,
)

TEACHER_TERMS = frozenset(
    {LossKind.BKD, LossKind.HKD, LossKind.RKD_D, LossKind.RKD_A, LossKind.TRIPLET_KD}
)
INDEX_SETS = {
    LossKind.RKD_D: "pairs",
    LossKind.RKD_A: "triplets",
    LossKind.TRIPLET_KD: "omega",
    LossKind.CONTRASTIVE: "metric_pairs",
    LossKind.TRIPLET: "metric_triplets",
}


@dataclass(eq=False)
class BatchOutputs:
    """Everything one mini-batch feeds into the loss.

    `teacher` holds constant logits and may be None when no teacher term is active.
    """

    student: Tensor
    labels: np.ndarray
    teacher: Tensor | None = None
    pairs: PairSet | None = None
    triplets: TripletSet | None = None
    omega: KDTripletSet | None = None
    metric_pairs: PairSet | None = None
    metric_triplets: TripletSet | None = None


@dataclass(eq=False)
class LossBreakdown:
    total: Tensor
    hard: Tensor
    terms: dict[LossKind, Tensor] = field(default_factory=dict)

    def values(self) -> dict[LossKind, float]:
        return {kind: value.item() for kind, value in self.terms.items()}


def combined_loss(
    spec: LossSpec, batch: BatchOutputs, diagnostics: LossDiagnostics | None = None
) -> LossBreakdown:
    """Cross-entropy plus every soft term with a positive weight.

    Terms are unweighted in the breakdown and weighted in `total`. Zero-weight
    terms are not evaluated, so an all-zero spec yields exactly the hard loss.
    """
    hard = cross_entropy_loss(batch.student, batch.labels)
    active = spec.active()
    if batch.teacher is None and TEACHER_TERMS.intersection(active):
        raise ValueError("active distillation terms need teacher outputs")
    if batch.teacher is not None and batch.teacher.shape != batch.student.shape:
        raise ValueError(
            f"teacher and student outputs differ: {batch.teacher.shape} vs {batch.student.shape}"
        )

    t_soft = s_soft = None
    if batch.teacher is not None:
        t_soft, s_soft = batch.teacher.detach(), batch.student
        if spec.outputs is SoftOutputs.SOFTMAX:
            t_soft, s_soft = softmax(t_soft), softmax(s_soft)

    terms: dict[LossKind, Tensor] = {}
    for kind in active:
        index_set = getattr(batch, INDEX_SETS[kind]) if kind in INDEX_SETS else None
        if index_set is not None and len(index_set) == 0 and kind is not LossKind.TRIPLET_KD:
            if diagnostics is not None:
                diagnostics.skipped_terms += 1
            terms[kind] = Tensor(0.0)
            continue
        if kind is LossKind.BKD:
            value = bkd_loss(t_soft, s_soft)
        elif kind is LossKind.HKD:
            value = hkd_loss(batch.teacher, batch.student, spec.temperature, spec.hkd_t2_scaling)
        elif kind is LossKind.RKD_D:
            value = rkd_d_loss(_need(batch.pairs, kind), t_soft, s_soft, spec.psi_norm)
        elif kind is LossKind.RKD_A:
            value = rkd_a_loss(_need(batch.triplets, kind), t_soft, s_soft, diagnostics)
        elif kind is LossKind.TRIPLET_KD:
            value = triplet_kd_loss(
                _need(batch.omega, kind),
                t_soft,
                s_soft,
                spec.margin,
                diagnostics,
                spec.triplet_reduction,
            )
        elif kind is LossKind.CONTRASTIVE:
            value = contrastive_loss(
                _need(batch.metric_pairs, kind), batch.student, spec.metric_margin
            )
        else:
            value = triplet_metric_loss(
                _need(batch.metric_triplets, kind), batch.student, spec.metric_margin
            )
        terms[kind] = value

    total = hard
    for kind, value in terms.items():
        total = total + value * spec.weight(kind)
    return LossBreakdown(total=total, hard=hard, terms=terms)


def _need(index_set, kind: LossKind):
    if index_set is None:
        raise ValueError(f"{kind.value} is active but the batch carries no index set for it")
    return index_set
