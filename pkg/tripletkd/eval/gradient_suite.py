"""Seeded gradient checks for every layer and loss.

Each check builds random inputs from a seed and returns a GradReport. New layers
or losses join the suite through `register_check`.
"""

from __future__ import annotations

import logging
from collections.abc import Callable
from dataclasses import dataclass, field

import numpy as np

from tripletkd.autodiff.gradcheck import GradReport, gradient_check
from tripletkd.autodiff.tensor import Tensor
from tripletkd.losses import (
    BatchOutputs,
    bkd_loss,
    combined_loss,
    contrastive_loss,
    cross_entropy_loss,
    hkd_loss,
    kl_divergence,
    rkd_a_loss,
    rkd_d_loss,
    rkd_da_loss,
    triplet_kd_loss,
    triplet_metric_loss,
)
from tripletkd.nn import layers
from tripletkd.sampling.sampler import (
    sample_kd_negatives,
    sample_labeled_pairs,
    sample_metric_triplets,
    sample_pairs,
    sample_triplets,
)
from tripletkd.types.config import LossSpec
from tripletkd.types.models import LossKind, NegativeStrategy, Reduction

logger = logging.getLogger(__name__)

CheckFn = Callable[[int, float, float], GradReport]

BATCH = 8
WIDTH = 5
LABELS = np.arange(BATCH) % 3


@dataclass
class CheckResult:
    name: str
    seeds: int
    max_rel_error: float
    skipped: int
    floored: int = 0
    failures: list[int] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.failures


def _uniform(rng: np.random.Generator, *shape: int) -> np.ndarray:
    return rng.uniform(-1.0, 1.0, size=shape)


def _projected(rng: np.random.Generator, fn: Callable[..., Tensor]) -> Callable[..., Tensor]:
    """Reduce a tensor-valued layer to a scalar through a fixed random projection."""
    weights: dict[tuple, np.ndarray] = {}

    def scalar(*args) -> Tensor:
        out = fn(*args)
        if out.shape not in weights:
            weights[out.shape] = rng.uniform(-1.0, 1.0, size=out.shape)
        return (out * weights[out.shape]).sum()

    return scalar


def _layer_check(build: Callable[[np.random.Generator], tuple[dict, Callable]]) -> CheckFn:
    def check(seed: int, tol: float, eps: float) -> GradReport:
        rng = np.random.default_rng(seed)
        inputs, fn = build(rng)
        scalar = _projected(rng, fn)
        return gradient_check(scalar, inputs, tol=tol, eps=eps)

    return check


def _loss_check(build: Callable[[np.random.Generator], Callable[[Tensor], Tensor]]) -> CheckFn:
    """Check a loss with respect to the student outputs; teacher outputs stay constant."""

    def check(seed: int, tol: float, eps: float) -> GradReport:
        rng = np.random.default_rng(seed)
        s = _uniform(rng, BATCH, WIDTH)
        fn = build(rng)
        return gradient_check(fn, s, tol=tol, eps=eps)

    return check


def _conv(rng):
    inputs = {"x": _uniform(rng, 2, 2, 5, 5), "w": _uniform(rng, 3, 2, 3, 3), "b": _uniform(rng, 3)}
    return inputs, lambda p: layers.conv2d(p["x"], p["w"], p["b"], padding=1)


def _linear(rng):
    inputs = {"x": _uniform(rng, 4, 6), "w": _uniform(rng, 3, 6), "b": _uniform(rng, 3)}
    return inputs, lambda p: layers.linear(p["x"], p["w"], p["b"])


def _relu(rng):
    return {"x": _uniform(rng, 4, 6)}, lambda p: layers.relu(p["x"])


def _maxpool(rng):
    return {"x": _uniform(rng, 2, 2, 5, 4)}, lambda p: layers.maxpool2x2(p["x"])


def _batchnorm_train(rng):
    inputs = {"x": _uniform(rng, 4, 3, 2, 2), "gamma": _uniform(rng, 3), "beta": _uniform(rng, 3)}

    def fn(p):
        running_mean, running_var = np.zeros(3), np.ones(3)
        return layers.batchnorm2d(
            p["x"], p["gamma"], p["beta"], running_mean, running_var, training=True
        )

    return inputs, fn


def _batchnorm_eval(rng):
    inputs = {"x": _uniform(rng, 4, 3, 2, 2), "gamma": _uniform(rng, 3), "beta": _uniform(rng, 3)}
    mean, var = _uniform(rng, 3), rng.uniform(0.5, 2.0, size=3)

    def fn(p):
        return layers.batchnorm2d(p["x"], p["gamma"], p["beta"], mean, var, training=False)

    return inputs, fn


def _dropout(rng):
    mask_seed = int(rng.integers(2**31))
    # a fresh generator per call freezes the mask across evaluations
    return {"x": _uniform(rng, 4, 6)}, lambda p: layers.dropout(
        p["x"], 0.5, training=True, rng=np.random.default_rng(mask_seed)
    )


def _softmax(rng):
    return {"x": _uniform(rng, 4, 6)}, lambda p: layers.softmax(p["x"])


def _log_softmax(rng):
    return {"x": _uniform(rng, 4, 6)}, lambda p: layers.log_softmax(p["x"])


def _flatten(rng):
    return {"x": _uniform(rng, 2, 2, 3, 3)}, lambda p: layers.flatten(p["x"])


def _bkd(rng):
    t = _uniform(rng, BATCH, WIDTH)
    return lambda s: bkd_loss(t, s)


def _hkd(temperature: float):
    def build(rng):
        t = _uniform(rng, BATCH, WIDTH)
        return lambda s: hkd_loss(t, s, temperature)

    return build


def _kl(rng):
    p = rng.dirichlet(np.ones(WIDTH))
    return lambda s: kl_divergence(p, layers.softmax(s[0]))


def _rkd_d(rng):
    t = _uniform(rng, BATCH, WIDTH)
    pairs = sample_pairs(BATCH, 12, rng)
    return lambda s: rkd_d_loss(pairs, t, s)


def _rkd_a(rng):
    t = _uniform(rng, BATCH, WIDTH)
    triplets = sample_triplets(BATCH, 12, rng)
    return lambda s: rkd_a_loss(triplets, t, s)


def _rkd_da(rng):
    t = _uniform(rng, BATCH, WIDTH)
    pairs, triplets = sample_pairs(BATCH, 12, rng), sample_triplets(BATCH, 12, rng)
    return lambda s: rkd_da_loss(pairs, triplets, t, s, 10.0, 20.0)


def _triplet_kd(reduction: Reduction):
    def build(rng):
        t = _uniform(rng, BATCH, WIDTH)
        omega = sample_kd_negatives(t, 1, NegativeStrategy.RANDOM, rng)
        return lambda s: triplet_kd_loss(omega, t, s, margin=5.0, reduction=reduction)

    return build


def _contrastive(rng):
    pairs = sample_labeled_pairs(LABELS, 12, rng)
    return lambda s: contrastive_loss(pairs, s, margin=1.0)


def _triplet_metric(rng):
    triplets = sample_metric_triplets(LABELS, 12, rng)
    return lambda s: triplet_metric_loss(triplets, s, margin=1.0)


def _cross_entropy(rng):
    labels = rng.integers(0, WIDTH, size=BATCH)
    return lambda s: cross_entropy_loss(s, labels)


def _combined(rng):
    t = _uniform(rng, BATCH, WIDTH)
    labels = LABELS
    spec = LossSpec.preset("ours+hkd+rkd-da")
    extra = {LossKind.BKD: 2.0, LossKind.CONTRASTIVE: 1.0, LossKind.TRIPLET: 1.0}
    spec = spec.model_copy(update={"weights": {**spec.weights, **extra}})
    sets = {
        "pairs": sample_pairs(BATCH, 12, rng),
        "triplets": sample_triplets(BATCH, 12, rng),
        "omega": sample_kd_negatives(t, 1, NegativeStrategy.RANDOM, rng),
        "metric_pairs": sample_labeled_pairs(labels, 12, rng),
        "metric_triplets": sample_metric_triplets(labels, 12, rng),
    }
    return lambda s: combined_loss(
        spec, BatchOutputs(student=s, labels=labels, teacher=Tensor(t), **sets)
    ).total


_CHECKS: dict[str, CheckFn] = {
    "layer:conv2d": _layer_check(_conv),
    "layer:linear": _layer_check(_linear),
    "layer:relu": _layer_check(_relu),
    "layer:maxpool2x2": _layer_check(_maxpool),
    "layer:batchnorm2d-train": _layer_check(_batchnorm_train),
    "layer:batchnorm2d-eval": _layer_check(_batchnorm_eval),
    "layer:dropout": _layer_check(_dropout),
    "layer:softmax": _layer_check(_softmax),
    "layer:log_softmax": _layer_check(_log_softmax),
    "layer:flatten": _layer_check(_flatten),
    "loss:contrastive": _loss_check(_contrastive),
    "loss:triplet": _loss_check(_triplet_metric),
    "loss:bkd": _loss_check(_bkd),
    "loss:kl": _loss_check(_kl),
    "loss:hkd-T1": _loss_check(_hkd(1.0)),
    "loss:hkd-T4": _loss_check(_hkd(4.0)),
    "loss:rkd_d": _loss_check(_rkd_d),
    "loss:rkd_a": _loss_check(_rkd_a),
    "loss:rkd_da": _loss_check(_rkd_da),
    "loss:triplet_kd": _loss_check(_triplet_kd(Reduction.SUM)),
    "loss:triplet_kd-mean": _loss_check(_triplet_kd(Reduction.MEAN)),
    "loss:cross_entropy": _loss_check(_cross_entropy),
    "loss:combined": _loss_check(_combined),
}


def register_check(name: str, check: CheckFn) -> None:
    """Register a gradient check; `check(seed, tol, eps)` returns a GradReport."""
    _CHECKS[name] = check


def check_names() -> list[str]:
    return list(_CHECKS)


def run_suite(
    seeds: int = 20,
    tol: float = 1e-5,
    eps: float = 1e-5,
    names: list[str] | None = None,
) -> list[CheckResult]:
    selected = check_names() if names is None else names
    unknown = [n for n in selected if n not in _CHECKS]
    if unknown:
        available = ", ".join(_CHECKS.keys())
        raise ValueError(f"Unknown gradient check(s) {', '.join(unknown)}. Available: {available}")

    results = []
    for name in selected:
        result = CheckResult(name=name, seeds=seeds, max_rel_error=0.0, skipped=0)
        for seed in range(seeds):
            report = _CHECKS[name](seed, tol, eps)
            result.max_rel_error = max(result.max_rel_error, report.max_rel_error)
            result.skipped += report.skipped
            result.floored += report.floored
            if not report.passed:
                result.failures.append(seed)
        if result.failures:
            logger.warning("%s failed on seeds %s", name, result.failures)
        results.append(result)
    return results
