from __future__ import annotations

import logging

import numpy as np

from tripletkd.autodiff.tensor import Tensor, as_tensor, where
from tripletkd.errors import DegenerateBatchError, ShapeError
from tripletkd.types.models import LossDiagnostics, PairSet, PsiNorm, TripletSet

logger = logging.getLogger(__name__)


def pairwise_distance(a: Tensor, b: Tensor) -> Tensor:
    """Euclidean distance along the last axis; rows are paired for 2-d inputs."""
    a, b = as_tensor(a), as_tensor(b)
    if a.shape[-1] != b.shape[-1]:
        raise ShapeError(f"pairwise_distance widths differ: {a.shape[-1]} vs {b.shape[-1]}")
    diff = a - b
    return (diff * diff).sum(axis=-1).sqrt()


def psi_distance(pairs: PairSet, outputs: Tensor, norm: PsiNorm = PsiNorm.SUM) -> Tensor:
    """Pair distances divided by their sum (or mean) over the pair set."""
    if len(pairs) == 0:
        raise DegenerateBatchError("psi_distance needs at least one pair")
    outputs = as_tensor(outputs)
    i, j = pairs.index[:, 0], pairs.index[:, 1]
    d = pairwise_distance(outputs[i], outputs[j])
    scale = d.sum() if norm is PsiNorm.SUM else d.mean()
    if scale.item() == 0.0:
        raise DegenerateBatchError("all pairwise distances are zero; psi_distance is undefined")
    return d / scale


def huber(p: Tensor | float, q: Tensor | float) -> Tensor:
    """Elementwise (1/2)(p-q)^2 for |p-q| <= 1, |p-q| - 1/2 beyond."""
    diff = as_tensor(p) - as_tensor(q)
    quadratic = np.abs(diff.data) <= 1.0
    return where(quadratic, diff * diff * 0.5, diff.abs() - 0.5)


def rkd_d_loss(
    pairs: PairSet, t: Tensor, s: Tensor, norm: PsiNorm = PsiNorm.SUM
) -> Tensor:
    t = as_tensor(t).detach()
    return huber(psi_distance(pairs, s, norm), psi_distance(pairs, t, norm)).sum()


def psi_angle(i: Tensor, j: Tensor, k: Tensor) -> Tensor:
    """Cosine of the angle at j between the rays to i and to k."""
    i, j, k = as_tensor(i), as_tensor(j), as_tensor(k)
    cos, valid = _cosines(i.reshape(1, -1), j.reshape(1, -1), k.reshape(1, -1))
    if not valid[0]:
        raise DegenerateBatchError("psi_angle is undefined when j coincides with i or k")
    return cos.reshape(())


def rkd_a_loss(
    triplets: TripletSet,
    t: Tensor,
    s: Tensor,
    diagnostics: LossDiagnostics | None = None,
) -> Tensor:
    """sum over triplets of huber(student cosine, teacher cosine).

    Triplets whose outputs coincide on either side are skipped; if none remain the
    batch is degenerate.
    """
    if len(triplets) == 0:
        raise DegenerateBatchError("rkd_a_loss needs at least one triplet")
    t, s = as_tensor(t).detach(), as_tensor(s)
    idx = triplets.index
    valid = _nondegenerate(t.data, idx) & _nondegenerate(s.data, idx)
    skipped = int((~valid).sum())
    if skipped == len(idx):
        raise DegenerateBatchError("every angle triplet has coincident outputs")
    if skipped:
        logger.warning("skipped %d degenerate angle triplets of %d", skipped, len(idx))
        if diagnostics is not None:
            diagnostics.skipped_angles += skipped
        idx = idx[valid]
    cos_t, _ = _cosines(t[idx[:, 0]], t[idx[:, 1]], t[idx[:, 2]])
    cos_s, _ = _cosines(s[idx[:, 0]], s[idx[:, 1]], s[idx[:, 2]])
    return huber(cos_s, cos_t).sum()


def rkd_da_loss(
    pairs: PairSet,
    triplets: TripletSet,
    t: Tensor,
    s: Tensor,
    lambda_d: float,
    lambda_a: float,
    norm: PsiNorm = PsiNorm.SUM,
    diagnostics: LossDiagnostics | None = None,
) -> Tensor:
    if lambda_d < 0 or lambda_a < 0:
        raise ValueError("rkd_da_loss weights must be >= 0")
    total = Tensor(0.0)
    if lambda_d > 0:
        total = total + rkd_d_loss(pairs, t, s, norm) * lambda_d
    if lambda_a > 0:
        total = total + rkd_a_loss(triplets, t, s, diagnostics) * lambda_a
    return total


def _cosines(i: Tensor, j: Tensor, k: Tensor) -> tuple[Tensor, np.ndarray]:
    u, v = i - j, k - j
    nu, nv = pairwise_distance(i, j), pairwise_distance(k, j)
    valid = (nu.data > 0) & (nv.data > 0)
    # degenerate rows are divided by 1 and must be masked by the caller
    nu = where(valid, nu, 1.0).reshape(-1, 1)
    nv = where(valid, nv, 1.0).reshape(-1, 1)
    return ((u / nu) * (v / nv)).sum(axis=-1), valid


def _nondegenerate(out: np.ndarray, idx: np.ndarray) -> np.ndarray:
    i, j, k = out[idx[:, 0]], out[idx[:, 1]], out[idx[:, 2]]
    return (((i - j) ** 2).sum(axis=-1) > 0) & (((k - j) ** 2).sum(axis=-1) > 0)
