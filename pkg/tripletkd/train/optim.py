from __future__ import annotations

from collections.abc import Mapping
from decimal import Decimal

import numpy as np

from tripletkd.errors import ShapeError
from tripletkd.types.config import OptimConfig
from tripletkd.types.models import ScheduleKind


def lr_at_epoch(cfg: OptimConfig, epoch: int) -> float:
    """lr * factor ** (epoch // period) for step decay, lr otherwise.

    Evaluated in decimal so the preset values come out exactly (0.01 -> 0.001 -> 1e-4).
    """
    if epoch < 0:
        raise ValueError(f"epoch must be >= 0, got {epoch}")
    if cfg.schedule is ScheduleKind.NONE:
        return cfg.lr
    steps = epoch // cfg.period
    return float(Decimal(repr(cfg.lr)) * Decimal(repr(cfg.factor)) ** steps)


def sgd_step(
    params: dict[str, np.ndarray],
    grads: Mapping[str, np.ndarray],
    velocity: dict[str, np.ndarray],
    lr: float,
    momentum: float,
    weight_decay: float,
    decay: set[str] | frozenset[str] = frozenset(),
) -> None:
    """One momentum SGD update in place: g' = g + wd*w, v = mu*v + g', w = w - lr*v.

    Weight decay only touches parameters named in `decay`. Missing gradients count
    as zero; momentum buffers start at zero.
    """
    for name, w in params.items():
        g = grads.get(name)
        if g is None:
            g = np.zeros_like(w)
        elif g.shape != w.shape:
            raise ShapeError(f"{name}: gradient shape {g.shape} != parameter shape {w.shape}")
        if weight_decay and name in decay:
            g = g + weight_decay * w
        v = velocity.get(name)
        if v is None:
            v = np.zeros_like(w)
        elif v.shape != w.shape:
            raise ShapeError(f"{name}: momentum buffer shape {v.shape} != {w.shape}")
        v = momentum * v + g
        velocity[name] = v
        params[name] = w - lr * v
