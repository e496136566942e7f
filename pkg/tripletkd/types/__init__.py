from tripletkd.types.config import (
    LOSS_WEIGHT_TABLES,
    METHODS,
    OPTIM_PRESETS,
    DatasetConfig,
    ExperimentConfig,
    LayerSpec,
    LossSpec,
    ModelConfig,
    ModelSpec,
    OptimConfig,
    SamplingConfig,
)
from tripletkd.types.models import (
    EpochMetrics,
    KDTripletSet,
    LayerKind,
    LossDiagnostics,
    LossKind,
    NegativeBy,
    NegativeStrategy,
    PairSet,
    PsiNorm,
    Role,
    RunRecord,
    ScheduleKind,
    SoftOutputs,
    TrainState,
    TripletSet,
)

__all__ = [
    "LOSS_WEIGHT_TABLES",
    "METHODS",
    "OPTIM_PRESETS",
    "DatasetConfig",
    "EpochMetrics",
    "ExperimentConfig",
    "KDTripletSet",
    "LayerKind",
    "LayerSpec",
    "LossDiagnostics",
    "LossKind",
    "LossSpec",
    "ModelConfig",
    "ModelSpec",
    "NegativeBy",
    "NegativeStrategy",
    "OptimConfig",
    "PairSet",
    "PsiNorm",
    "Role",
    "RunRecord",
    "SamplingConfig",
    "ScheduleKind",
    "SoftOutputs",
    "TrainState",
    "TripletSet",
]
