from __future__ import annotations

import math

import numpy as np

from tripletkd.autodiff.tensor import Tensor, as_tensor, where
from tripletkd.errors import ConfigError, LabelError, ShapeError
from tripletkd.nn.layers import log_softmax, softmax

# probabilities are floored here inside every log
PROB_FLOOR = 1e-12


def bkd_loss(t: Tensor, s: Tensor) -> Tensor:
    """(1/2) sum_i ||t_i - s_i||^2 over the batch; the teacher side is constant."""
    t, s = _pair(t, s)
    diff = t - s
    return (diff * diff).sum() * 0.5


def kl_divergence(p: Tensor | np.ndarray, q: Tensor | np.ndarray) -> Tensor:
    """sum p_i ln(p_i / q_i) over all entries, with q floored at PROB_FLOOR.

    Entries with p_i = 0 contribute exactly 0.
    """
    p, q = as_tensor(p), as_tensor(q)
    if p.shape != q.shape:
        raise ShapeError(f"kl_divergence shapes differ: {p.shape} vs {q.shape}")
    support = p.data > 0
    log_p = where(support, p, 1.0).log()
    log_q = q.clamp_min(PROB_FLOOR).log()
    return where(support, p * (log_p - log_q), 0.0).sum()


def hkd_loss(t: Tensor, s: Tensor, temperature: float, t2_scaling: bool = False) -> Tensor:
    """sum_i KL(softmax(t_i/T) || softmax(s_i/T)).

    With `t2_scaling` the loss is multiplied by T^2.
    """
    if temperature <= 0:
        raise ConfigError([("loss.temperature", f"must be > 0, got {temperature}")])
    t, s = _pair(t, s)
    floor = math.log(PROB_FLOOR)
    p = softmax(t * (1.0 / temperature))
    # both sides go through the same log_softmax so identical logits give exactly 0
    log_p = log_softmax(t * (1.0 / temperature)).clamp_min(floor)
    log_q = log_softmax(s * (1.0 / temperature)).clamp_min(floor)
    loss = (p * (log_p - log_q)).sum()
    if t2_scaling:
        loss = loss * (temperature * temperature)
    return loss


def cross_entropy_loss(logits: Tensor, labels: np.ndarray) -> Tensor:
    """Mean over the batch of -ln softmax(logits_i)[y_i]."""
    logits = as_tensor(logits)
    labels = np.asarray(labels, dtype=np.int64)
    n, k = logits.shape
    if labels.shape != (n,):
        raise ShapeError(f"expected {n} labels, got shape {labels.shape}")
    if labels.size and (labels.min() < 0 or labels.max() >= k):
        bad = labels[(labels < 0) | (labels >= k)][0]
        raise LabelError(f"label {bad} outside [0, {k})")
    picked = log_softmax(logits)[np.arange(n), labels]
    return -picked.mean()


def _pair(t: Tensor, s: Tensor) -> tuple[Tensor, Tensor]:
    t, s = as_tensor(t).detach(), as_tensor(s)
    if t.shape != s.shape:
        raise ShapeError(f"teacher and student outputs differ in shape: {t.shape} vs {s.shape}")
    return t, s
