from __future__ import annotations

import logging
from enum import IntEnum

import numpy as np

from tripletkd.errors import DegenerateBatchError
from tripletkd.types.config import LossSpec, SamplingConfig
from tripletkd.types.models import (
    KDTripletSet,
    LossKind,
    NegativeBy,
    NegativeStrategy,
    PairSet,
    TripletSet,
)

logger = logging.getLogger(__name__)


class Stream(IntEnum):
    """Independent random streams of one training step."""

    SAMPLING = 0
    DROPOUT = 1


def step_rng(seed: int, epoch: int, step: int, stream: Stream) -> np.random.Generator:
    return np.random.default_rng([seed, epoch, step, int(stream)])


def sample_pairs(batch_size: int, count: int, rng: np.random.Generator) -> PairSet:
    """`count` distinct unordered pairs (i < j), drawn uniformly."""
    if batch_size < 2:
        raise DegenerateBatchError(f"sample_pairs needs batch_size >= 2, got {batch_size}")
    rows, cols = np.triu_indices(batch_size, k=1)
    count = _cap(count, len(rows), "pairs", batch_size)
    chosen = rng.choice(len(rows), size=count, replace=False)
    return PairSet(index=np.stack([rows[chosen], cols[chosen]], axis=1))


def sample_triplets(batch_size: int, count: int, rng: np.random.Generator) -> TripletSet:
    """`count` distinct ordered triples (i, j, k) of distinct indices; j is the vertex."""
    if batch_size < 3:
        raise DegenerateBatchError(f"sample_triplets needs batch_size >= 3, got {batch_size}")
    n = batch_size
    total = n * (n - 1) * (n - 2)
    count = _cap(count, total, "triplets", batch_size)
    code = rng.choice(total, size=count, replace=False)
    # mixed-radix decode: i over n, j over the n-1 others, k over the n-2 remaining
    i, rest = np.divmod(code, (n - 1) * (n - 2))
    j, k = np.divmod(rest, n - 2)
    j = j + (j >= i)
    lo, hi = np.minimum(i, j), np.maximum(i, j)
    k = k + (k >= lo)
    k = k + (k >= hi)
    return TripletSet(index=np.stack([i, j, k], axis=1).astype(np.int64))


def sample_kd_negatives(
    t_logits: np.ndarray,
    per_anchor: int,
    strategy: NegativeStrategy,
    rng: np.random.Generator,
    s_logits: np.ndarray | None = None,
    labels: np.ndarray | None = None,
    negative_by: NegativeBy = NegativeBy.TEACHER_ARGMAX,
) -> KDTripletSet:
    """Anchor/negative pairs where the negative falls in a different class than the anchor.

    Every batch member is an anchor. Classes come from the teacher argmax (lowest
    index on ties) or from `labels`. `hardest` picks the negatives whose student
    output lies closest to the anchor's teacher output.
    """
    t = np.asarray(t_logits, dtype=np.float64)
    n = t.shape[0]
    if n < 2:
        raise DegenerateBatchError(f"sample_kd_negatives needs N >= 2, got {n}")
    if negative_by is NegativeBy.GROUND_TRUTH:
        if labels is None:
            raise ValueError("negative_by=ground_truth needs labels")
        classes = np.asarray(labels)
    else:
        classes = t.argmax(axis=1)
    if strategy is NegativeStrategy.HARDEST and s_logits is None:
        raise ValueError("hardest negative mining needs student outputs")

    entries: list[tuple[int, int]] = []
    per = np.zeros(n, dtype=np.int64)
    for a in range(n):
        candidates = np.flatnonzero(classes != classes[a])
        if candidates.size == 0:
            continue
        take = min(per_anchor, candidates.size)
        if strategy is NegativeStrategy.HARDEST:
            diff = np.asarray(s_logits)[candidates] - t[a]
            dist = (diff * diff).sum(axis=1)
            picked = candidates[np.argsort(dist, kind="stable")[:take]]
        else:
            picked = rng.choice(candidates, size=take, replace=False)
        entries.extend((a, int(neg)) for neg in picked)
        per[a] = take

    index = np.array(entries, dtype=np.int64).reshape(-1, 2)
    if not entries:
        logger.debug("batch of %d is single-class; no anchor/negative pairs", n)
    return KDTripletSet(index=index, per_anchor=per)


def sample_labeled_pairs(labels: np.ndarray, count: int, rng: np.random.Generator) -> PairSet:
    """Random pairs labelled 1 when both samples share a class, else 0."""
    labels = np.asarray(labels)
    pairs = sample_pairs(len(labels), count, rng)
    same = labels[pairs.index[:, 0]] == labels[pairs.index[:, 1]]
    return PairSet(index=pairs.index, labels=same.astype(np.float64))


def sample_metric_triplets(
    labels: np.ndarray, count: int, rng: np.random.Generator
) -> TripletSet:
    """(anchor, positive, negative) with a shared anchor/positive class and a different negative."""
    labels = np.asarray(labels)
    classes, counts = np.unique(labels, return_counts=True)
    class_size = dict(zip(classes.tolist(), counts.tolist()))
    anchors = np.array(
        [i for i, y in enumerate(labels.tolist()) if 1 < class_size[y] < len(labels)],
        dtype=np.int64,
    )
    if anchors.size == 0:
        logger.debug("no anchor with both a positive and a negative in batch of %d", len(labels))
        return TripletSet(index=np.zeros((0, 3), dtype=np.int64))

    rows = []
    for a in rng.choice(anchors, size=count, replace=True):
        positives = np.flatnonzero((labels == labels[a]) & (np.arange(len(labels)) != a))
        negatives = np.flatnonzero(labels != labels[a])
        rows.append((int(a), int(rng.choice(positives)), int(rng.choice(negatives))))
    return TripletSet(index=np.array(rows, dtype=np.int64))


def sample_index_sets(
    loss: LossSpec,
    sampling: SamplingConfig,
    rng: np.random.Generator,
    labels: np.ndarray,
    t_logits: np.ndarray | None = None,
    s_logits: np.ndarray | None = None,
) -> dict[str, PairSet | TripletSet | KDTripletSet]:
    """Draw only the index sets the active loss terms read.

    Sets a batch is too small to form come back empty. Draw order is fixed so the
    stream is reproducible.
    """
    active = set(loss.active())
    n = len(labels)
    sets: dict[str, PairSet | TripletSet | KDTripletSet] = {}
    if LossKind.RKD_D in active:
        sets["pairs"] = (
            sample_pairs(n, sampling.pairs, rng) if n >= 2 else PairSet(np.zeros((0, 2), int))
        )
    if LossKind.RKD_A in active:
        sets["triplets"] = (
            sample_triplets(n, sampling.triplets, rng)
            if n >= 3
            else TripletSet(np.zeros((0, 3), int))
        )
    if LossKind.TRIPLET_KD in active:
        sets["omega"] = (
            sample_kd_negatives(
                t_logits,
                sampling.per_anchor,
                sampling.strategy,
                rng,
                s_logits=s_logits,
                labels=labels,
                negative_by=sampling.negative_by,
            )
            if n >= 2
            else KDTripletSet(np.zeros((0, 2), int), np.zeros(n, int))
        )
    if LossKind.CONTRASTIVE in active:
        sets["metric_pairs"] = (
            sample_labeled_pairs(labels, sampling.metric_pairs, rng)
            if n >= 2
            else PairSet(np.zeros((0, 2), int), np.zeros(0))
        )
    if LossKind.TRIPLET in active:
        sets["metric_triplets"] = sample_metric_triplets(labels, sampling.metric_triplets, rng)
    return sets


def _cap(count: int, available: int, what: str, batch_size: int) -> int:
    if count > available:
        logger.warning(
            "requested %d %s but a batch of %d has only %d; truncating",
            count,
            what,
            batch_size,
            available,
        )
        return available
    return count
