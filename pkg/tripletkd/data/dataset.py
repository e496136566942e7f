from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from tripletkd.errors import LabelError, ShapeError


@dataclass(eq=False)
class Dataset:
    """Samples shaped (N, C, H, W) or (N, F) with integer labels in [0, num_classes)."""

    samples: np.ndarray
    labels: np.ndarray
    num_classes: int
    split: str = "train"
    # rank of the IDX image file the samples were read from, if any
    source_rank: int | None = None

    def __post_init__(self) -> None:
        self.samples = np.asarray(self.samples, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.labels.ndim != 1 or len(self.labels) != len(self.samples):
            raise ShapeError(
                f"{len(self.samples)} samples but labels shaped {self.labels.shape}"
            )
        if len(self.labels) and (self.labels.min() < 0 or self.labels.max() >= self.num_classes):
            raise LabelError(f"labels must lie in [0, {self.num_classes})")

    def __len__(self) -> int:
        return len(self.labels)

    @property
    def sample_shape(self) -> tuple[int, ...]:
        return self.samples.shape[1:]

    def batches(self, size: int, seed: int, epoch: int) -> list[np.ndarray]:
        return batches(self, size, seed, epoch)


def batches(dataset: Dataset, size: int, seed: int, epoch: int) -> list[np.ndarray]:
    """Shuffled partition of the sample indices; the final short batch is kept.

    The order depends on (seed, epoch) only.
    """
    if size < 1:
        raise ValueError(f"batch size must be >= 1, got {size}")
    order = np.random.default_rng([seed, epoch]).permutation(len(dataset))
    return [order[start : start + size] for start in range(0, len(order), size)]


def standardize(train: Dataset, *others: Dataset) -> list[Dataset]:
    """Shift and scale every channel (or feature) by the training-set mean and std."""
    axes = (0, 2, 3) if train.samples.ndim == 4 else (0,)
    mean = train.samples.mean(axis=axes, keepdims=True)
    std = train.samples.std(axis=axes, keepdims=True)
    std = np.where(std > 0, std, 1.0)
    return [
        Dataset((d.samples - mean) / std, d.labels, d.num_classes, d.split, d.source_rank)
        for d in (train, *others)
    ]
