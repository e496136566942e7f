from __future__ import annotations

import logging
import math
from collections.abc import Callable
from dataclasses import dataclass, field

import numpy as np

from tripletkd.autodiff.tensor import no_grad
from tripletkd.data.dataset import Dataset
from tripletkd.errors import DegenerateBatchError, ShapeError, TrainingDivergedError
from tripletkd.losses.combined import BatchOutputs, combined_loss
from tripletkd.nn.model import Model
from tripletkd.sampling.sampler import Stream, sample_index_sets, step_rng
from tripletkd.train.optim import lr_at_epoch, sgd_step
from tripletkd.types.config import LossSpec, OptimConfig, SamplingConfig
from tripletkd.types.models import EpochMetrics, LossDiagnostics, LossKind, TrainState

logger = logging.getLogger(__name__)

EpochCallback = Callable[[EpochMetrics], None]
EVAL_BATCH = 512


@dataclass
class TrainResult:
    model: Model
    state: TrainState
    diagnostics: LossDiagnostics = field(default_factory=LossDiagnostics)

    @property
    def history(self) -> list[EpochMetrics]:
        return self.state.history


def train_teacher(
    model: Model,
    train: Dataset,
    test: Dataset,
    optim: OptimConfig,
    seed: int,
    epochs: int | None = None,
    on_epoch: EpochCallback | None = None,
) -> TrainResult:
    """Cross-entropy training; `model` is updated in place and returned in the result."""
    _check_width(model, train)
    return _fit(
        model, None, train, test, LossSpec(), SamplingConfig(), optim, seed, epochs, on_epoch
    )


def distill_student(
    student: Model,
    teacher: Model,
    train: Dataset,
    test: Dataset,
    loss: LossSpec,
    sampling: SamplingConfig,
    optim: OptimConfig,
    seed: int,
    epochs: int | None = None,
    on_epoch: EpochCallback | None = None,
) -> TrainResult:
    """Train `student` against a frozen `teacher` with the hard loss plus the active soft terms.

    The teacher runs in inference mode without recording; its parameters are
    verified unchanged afterwards.
    """
    _check_width(student, train)
    if teacher.num_classes != student.num_classes:
        raise ShapeError(
            f"teacher emits {teacher.num_classes} logits but student emits {student.num_classes}"
        )
    before = teacher.store.digest()
    result = _fit(student, teacher, train, test, loss, sampling, optim, seed, epochs, on_epoch)
    if teacher.store.digest() != before:
        raise RuntimeError("teacher parameters changed during distillation")
    return result


def evaluate_accuracy(model: Model, dataset: Dataset, batch_size: int = EVAL_BATCH) -> float:
    """Fraction of samples whose argmax logit equals the label, in inference mode."""
    if len(dataset) == 0:
        raise ValueError("cannot evaluate on an empty dataset")
    _check_width(model, dataset)
    correct = 0
    with no_grad():
        for start in range(0, len(dataset), batch_size):
            stop = start + batch_size
            predicted = model.predict(dataset.samples[start:stop])
            correct += int((predicted == dataset.labels[start:stop]).sum())
    return correct / len(dataset)


def _fit(
    model: Model,
    teacher: Model | None,
    train: Dataset,
    test: Dataset,
    loss: LossSpec,
    sampling: SamplingConfig,
    optim: OptimConfig,
    seed: int,
    epochs: int | None,
    on_epoch: EpochCallback | None,
) -> TrainResult:
    epochs = optim.epochs if epochs is None else epochs
    state = TrainState(epoch=0, seed=seed)
    diagnostics = LossDiagnostics()
    active = loss.active()
    omega_only = active == [LossKind.TRIPLET_KD]

    for epoch in range(epochs):
        lr = lr_at_epoch(optim, epoch)
        index_batches = train.batches(optim.batch_size, seed, epoch)
        hard_sum = total_sum = 0.0
        term_sums = {kind: 0.0 for kind in active}
        empty_before = diagnostics.empty_omega

        for step, idx in enumerate(index_batches):
            xb, yb = train.samples[idx], train.labels[idx]
            leaves = model.leaves()
            s = model.forward(
                xb, training=True, rng=step_rng(seed, epoch, step, Stream.DROPOUT), params=leaves
            )
            t = None
            if teacher is not None:
                with no_grad():
                    t = teacher.forward(xb, training=False)
            sets = sample_index_sets(
                loss,
                sampling,
                step_rng(seed, epoch, step, Stream.SAMPLING),
                yb,
                t_logits=None if t is None else t.data,
                s_logits=s.data,
            )
            breakdown = combined_loss(
                loss, BatchOutputs(student=s, labels=yb, teacher=t, **sets), diagnostics
            )
            value = breakdown.total.item()
            if not math.isfinite(value):
                raise TrainingDivergedError(epoch, step, value)

            grads = breakdown.total.backward()
            sgd_step(
                model.store.params,
                {name: grads[leaf] for name, leaf in leaves.items() if leaf in grads},
                state.velocity,
                lr,
                optim.momentum,
                optim.weight_decay,
                model.store.decay,
            )
            state.step_losses.append(value)
            hard_sum += breakdown.hard.item()
            total_sum += value
            for kind, term in breakdown.terms.items():
                term_sums[kind] += term.item()

        n_batches = len(index_batches)
        empty = diagnostics.empty_omega - empty_before
        if omega_only and n_batches and empty == n_batches:
            raise DegenerateBatchError(
                f"epoch {epoch}: no batch had an anchor with a negative of another class; "
                "the batches are too homogeneous for triplet-KD alone. Use larger batches, "
                "negative_by=ground_truth, or add another soft term"
            )
        metrics = EpochMetrics(
            epoch=epoch,
            lr=lr,
            hard_loss=hard_sum / max(n_batches, 1),
            total_loss=total_sum / max(n_batches, 1),
            test_accuracy=evaluate_accuracy(model, test),
            terms={kind: acc / max(n_batches, 1) for kind, acc in term_sums.items()},
            empty_omega_batches=empty,
        )
        state.history.append(metrics)
        state.epoch = epoch + 1
        logger.info(
            "epoch %d: lr=%g loss=%.6f hard=%.6f acc=%.4f",
            epoch,
            lr,
            metrics.total_loss,
            metrics.hard_loss,
            metrics.test_accuracy,
        )
        if empty:
            logger.warning(
                "epoch %d: %d of %d batches had an empty negative set", epoch, empty, n_batches
            )
        if on_epoch is not None:
            on_epoch(metrics)

    return TrainResult(model=model, state=state, diagnostics=diagnostics)


def _check_width(model: Model, dataset: Dataset) -> None:
    if dataset.num_classes > model.num_classes:
        raise ShapeError(
            f"model emits {model.num_classes} logits "
            f"but the dataset has {dataset.num_classes} classes"
        )
    if np.any(dataset.labels >= model.num_classes):
        raise ShapeError("dataset labels exceed the model output width")
