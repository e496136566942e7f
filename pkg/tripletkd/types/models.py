from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np


class LayerKind(str, Enum):
    CONV2D = "conv2d"
    MAXPOOL2X2 = "maxpool2x2"
    RELU = "relu"
    LINEAR = "linear"
    BATCHNORM2D = "batchnorm2d"
    DROPOUT = "dropout"
    SOFTMAX = "softmax"
    FLATTEN = "flatten"


class LossKind(str, Enum):
    BKD = "bkd"
    HKD = "hkd"
    RKD_D = "rkd_d"
    RKD_A = "rkd_a"
    TRIPLET_KD = "triplet_kd"
    CONTRASTIVE = "contrastive"
    TRIPLET = "triplet"


class NegativeStrategy(str, Enum):
    RANDOM = "random"
    HARDEST = "hardest"


class NegativeBy(str, Enum):
    TEACHER_ARGMAX = "teacher_argmax"
    GROUND_TRUTH = "ground_truth"


class PsiNorm(str, Enum):
    SUM = "sum"
    MEAN = "mean"


class Reduction(str, Enum):
    SUM = "sum"
    MEAN = "mean"


class SoftOutputs(str, Enum):
    LOGITS = "logits"
    SOFTMAX = "softmax"


class ScheduleKind(str, Enum):
    STEP_DECAY = "step_decay"
    NONE = "none"


class Role(str, Enum):
    TEACHER = "teacher"
    STUDENT = "student"


@dataclass(eq=False)
class PairSet:
    """Index pairs (i, j) into a mini-batch; `labels` holds l_ij when drawn for contrastive loss."""

    index: np.ndarray
    labels: np.ndarray | None = None

    def __len__(self) -> int:
        return len(self.index)


@dataclass(eq=False)
class TripletSet:
    """Index triples into a mini-batch: (i, j, k) for angles or (a, p, n) for metric triplets."""

    index: np.ndarray

    def __len__(self) -> int:
        return len(self.index)


@dataclass(eq=False)
class KDTripletSet:
    """Anchor/negative pairs (a, n) for triplet distillation, plus negatives drawn per anchor."""

    index: np.ndarray
    per_anchor: np.ndarray

    def __len__(self) -> int:
        return len(self.index)


@dataclass
class LossDiagnostics:
    empty_omega: int = 0
    skipped_angles: int = 0
    # relational/metric terms left out because the batch could not form their index set
    skipped_terms: int = 0


@dataclass
class EpochMetrics:
    epoch: int
    lr: float
    hard_loss: float
    total_loss: float
    test_accuracy: float
    terms: dict[LossKind, float] = field(default_factory=dict)
    empty_omega_batches: int = 0


@dataclass
class TrainState:
    epoch: int
    seed: int
    velocity: dict[str, np.ndarray] = field(default_factory=dict)
    history: list[EpochMetrics] = field(default_factory=list)
    step_losses: list[float] = field(default_factory=list)


@dataclass
class RunRecord:
    run: str
    role: Role
    method: str
    seed: int
    param_count: int
    history: list[EpochMetrics] = field(default_factory=list)

    @property
    def final_accuracy(self) -> float | None:
        return self.history[-1].test_accuracy if self.history else None
