from __future__ import annotations

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from pathlib import Path
from typing import Any, Literal

from pydantic import BaseModel, Field, ValidationError, field_validator, model_validator

from tripletkd.types.models import (
    LayerKind,
    LossKind,
    NegativeBy,
    NegativeStrategy,
    PsiNorm,
    Reduction,
    ScheduleKind,
    SoftOutputs,
)

# Loss weights per dataset family, as used for the CIFAR-10 and Tiny-ImageNet runs.
LOSS_WEIGHT_TABLES: dict[str, dict[LossKind, float]] = {
    "cifar10": {
        LossKind.BKD: 2.0,
        LossKind.HKD: 16.0,
        LossKind.RKD_D: 10.0,
        LossKind.RKD_A: 20.0,
        LossKind.TRIPLET_KD: 2.0,
    },
    "tiny-imagenet": {
        LossKind.BKD: 2.0,
        LossKind.HKD: 16.0,
        LossKind.RKD_D: 25.0,
        LossKind.RKD_A: 50.0,
        LossKind.TRIPLET_KD: 2.0,
    },
}

# Method name -> active soft terms. Order doubles as the row order of comparison tables.
METHODS: dict[str, tuple[LossKind, ...]] = {
    "student": (),
    "bkd": (LossKind.BKD,),
    "hkd": (LossKind.HKD,),
    "rkd-da": (LossKind.RKD_D, LossKind.RKD_A),
    "ours": (LossKind.TRIPLET_KD,),
    "bkd+hkd": (LossKind.BKD, LossKind.HKD),
    "rkd-da+hkd": (LossKind.RKD_D, LossKind.RKD_A, LossKind.HKD),
    "ours+hkd": (LossKind.TRIPLET_KD, LossKind.HKD),
    "ours+rkd-da": (LossKind.TRIPLET_KD, LossKind.RKD_D, LossKind.RKD_A),
    "ours+hkd+rkd-da": (LossKind.TRIPLET_KD, LossKind.HKD, LossKind.RKD_D, LossKind.RKD_A),
}

OPTIM_PRESETS: dict[str, dict[str, Any]] = {
    "cifar10": {"lr": 0.01, "schedule": "step_decay", "factor": 0.1, "period": 100, "epochs": 300},
    "tiny-imagenet": {
        "lr": 0.001,
        "schedule": "step_decay",
        "factor": 0.9,
        "period": 3,
        "epochs": 30,
    },
    "desk": {"lr": 0.01, "schedule": "step_decay", "factor": 0.1, "period": 100, "epochs": 30},
}


class LayerSpec(BaseModel):
    kind: LayerKind
    channels: int | None = Field(default=None, ge=1, description="Output channels (conv2d)")
    kernel: tuple[int, int] | None = Field(default=None, description="Filter size (convy, convx)")
    padding: int = Field(default=0, ge=0, description="Zero padding on each border")
    units: int | None = Field(default=None, ge=1, description="Output width (linear)")
    rate: float | None = Field(default=None, ge=0.0, lt=1.0, description="Drop probability")

    model_config = {"extra": "forbid"}

    @field_validator("kernel", mode="before")
    @classmethod
    def _square_kernel(cls, value: Any) -> Any:
        if isinstance(value, int):
            return (value, value)
        return value

    @model_validator(mode="after")
    def _check_kind_fields(self) -> LayerSpec:
        if self.kind is LayerKind.CONV2D:
            if self.channels is None or self.kernel is None:
                raise ValueError("conv2d needs channels and kernel")
            if min(self.kernel) < 1:
                raise ValueError("conv2d kernel extents must be >= 1")
        if self.kind is LayerKind.LINEAR and self.units is None:
            raise ValueError("linear needs units")
        return self

    @classmethod
    def conv(cls, channels: int, kernel: int = 3, padding: int = 1) -> LayerSpec:
        return cls(
            kind=LayerKind.CONV2D, channels=channels, kernel=(kernel, kernel), padding=padding
        )

    @classmethod
    def linear(cls, units: int) -> LayerSpec:
        return cls(kind=LayerKind.LINEAR, units=units)


class ModelSpec(BaseModel):
    input_shape: tuple[int, ...] = Field(description="(C, H, W) for images or (F,) for features")
    num_classes: int = Field(ge=1)
    layers: list[LayerSpec]
    bn_eps: float = Field(default=1e-5, gt=0)
    bn_momentum: float = Field(default=0.1, gt=0, le=1)
    dropout_rate: float = Field(default=0.5, ge=0.0, lt=1.0)

    model_config = {"extra": "forbid"}

    @field_validator("input_shape")
    @classmethod
    def _positive_extents(cls, value: tuple[int, ...]) -> tuple[int, ...]:
        if not value or min(value) < 1:
            raise ValueError("input_shape extents must be positive")
        return value


class ModelConfig(BaseModel):
    """A model section: either a named preset or an explicit layer list."""

    preset: str | None = None
    layers: list[LayerSpec] | None = None
    input_shape: tuple[int, ...] | None = None
    num_classes: int | None = Field(default=None, ge=1)
    hidden: list[int] = Field(default_factory=list, description="Hidden widths for the mlp preset")
    dropout_rate: float = Field(default=0.5, ge=0.0, lt=1.0)
    bn_eps: float = Field(default=1e-5, gt=0)
    bn_momentum: float = Field(default=0.1, gt=0, le=1)

    model_config = {"extra": "forbid"}

    @model_validator(mode="after")
    def _preset_or_layers(self) -> ModelConfig:
        if (self.preset is None) == (self.layers is None):
            raise ValueError("give exactly one of 'preset' or 'layers'")
        if self.layers is not None and (self.input_shape is None or self.num_classes is None):
            raise ValueError("an explicit layer list needs input_shape and num_classes")
        return self

    def to_spec(self) -> ModelSpec:
        if self.layers is not None:
            return ModelSpec(
                input_shape=self.input_shape,
                num_classes=self.num_classes,
                layers=self.layers,
                bn_eps=self.bn_eps,
                bn_momentum=self.bn_momentum,
                dropout_rate=self.dropout_rate,
            )
        from tripletkd.nn.architectures import build_preset

        spec = build_preset(
            self.preset,
            input_shape=self.input_shape,
            num_classes=self.num_classes,
            hidden=self.hidden,
            dropout_rate=self.dropout_rate,
        )
        return spec.model_copy(update={"bn_eps": self.bn_eps, "bn_momentum": self.bn_momentum})


class LossSpec(BaseModel):
    weights: dict[LossKind, float] = Field(default_factory=dict, description="Soft-term weights")
    temperature: float = Field(default=4.0, gt=0, description="HKD temperature T")
    margin: float = Field(default=5.0, ge=0, description="Triplet-KD margin m")
    triplet_reduction: Reduction = Field(
        default=Reduction.SUM, description="Sum or mean of the triplet-KD hinges over Omega"
    )
    metric_margin: float = Field(default=1.0, ge=0, description="Contrastive/triplet margin")
    psi_norm: PsiNorm = PsiNorm.SUM
    outputs: SoftOutputs = SoftOutputs.LOGITS
    hkd_t2_scaling: bool = False

    model_config = {"extra": "forbid"}

    @model_validator(mode="before")
    @classmethod
    def _expand_preset(cls, data: Any) -> Any:
        if isinstance(data, dict) and "preset" in data:
            data = dict(data)
            method = data.pop("preset")
            table = data.pop("table", "cifar10")
            preset = _preset_weights(method, table)
            data["weights"] = {**preset, **data.get("weights", {})}
        return data

    @field_validator("weights")
    @classmethod
    def _nonnegative(cls, value: dict[LossKind, float]) -> dict[LossKind, float]:
        negative = [k.value for k, w in value.items() if w < 0]
        if negative:
            raise ValueError(f"loss weights must be >= 0: {', '.join(negative)}")
        return value

    def weight(self, kind: LossKind) -> float:
        return self.weights.get(kind, 0.0)

    def active(self) -> list[LossKind]:
        return [kind for kind in LossKind if self.weight(kind) > 0]

    @classmethod
    def preset(cls, method: str, table: str = "cifar10", **overrides: Any) -> LossSpec:
        return cls(weights=_preset_weights(method, table), **overrides)


class SamplingConfig(BaseModel):
    pairs: int = Field(default=64, ge=1, description="|chi^2| per mini-batch")
    triplets: int = Field(default=64, ge=1, description="|chi^3| per mini-batch")
    per_anchor: int = Field(default=1, ge=1, description="Negatives per anchor in Omega")
    strategy: NegativeStrategy = NegativeStrategy.RANDOM
    negative_by: NegativeBy = NegativeBy.TEACHER_ARGMAX
    metric_pairs: int = Field(default=64, ge=1)
    metric_triplets: int = Field(default=64, ge=1)

    model_config = {"extra": "forbid"}


class OptimConfig(BaseModel):
    lr: float = Field(default=0.01, gt=0)
    momentum: float = Field(default=0.9, ge=0, lt=1)
    weight_decay: float = Field(default=5e-4, ge=0)
    schedule: ScheduleKind = ScheduleKind.STEP_DECAY
    factor: float = Field(default=0.1, gt=0)
    period: int = Field(default=100, ge=1)
    epochs: int = Field(default=30, ge=0)
    batch_size: int = Field(default=128, ge=1)

    model_config = {"extra": "forbid"}

    @model_validator(mode="before")
    @classmethod
    def _expand_preset(cls, data: Any) -> Any:
        if isinstance(data, dict) and "preset" in data:
            data = dict(data)
            name = data.pop("preset")
            if name not in OPTIM_PRESETS:
                raise ValueError(
                    f"unknown optimizer preset '{name}'. Available: {', '.join(OPTIM_PRESETS)}"
                )
            data = {**OPTIM_PRESETS[name], **data}
        return data

    @classmethod
    def preset(cls, name: str, **overrides: Any) -> OptimConfig:
        return cls.model_validate({"preset": name, **overrides})


class DatasetConfig(BaseModel):
    kind: Literal["synth_blobs", "cifar10", "idx"] = "synth_blobs"
    train_paths: list[str] = Field(default_factory=list, description="CIFAR-10 training files")
    test_paths: list[str] = Field(default_factory=list, description="CIFAR-10 test files")
    train_images: str | None = None
    train_labels: str | None = None
    test_images: str | None = None
    test_labels: str | None = None
    classes: int = Field(default=5, ge=2)
    per_class: int = Field(default=200, ge=1)
    test_per_class: int = Field(default=100, ge=1)
    dim: int = Field(default=16, ge=2)
    spread: float = Field(default=0.5, ge=0)
    synth_seed: int = 0
    standardize: bool = False

    model_config = {"extra": "forbid"}

    def paths(self) -> dict[str, list[str]]:
        if self.kind == "cifar10":
            return {"train_paths": self.train_paths, "test_paths": self.test_paths}
        if self.kind == "idx":
            return {
                name: [value] if value else []
                for name, value in (
                    ("train_images", self.train_images),
                    ("train_labels", self.train_labels),
                    ("test_images", self.test_images),
                    ("test_labels", self.test_labels),
                )
            }
        return {}


class ExperimentConfig(BaseModel):
    name: str = Field(default="run", description="Run name; the method label in comparisons")
    seeds: list[int] = Field(default_factory=lambda: [0], min_length=1)
    output_dir: str = "runs"
    teacher_checkpoint: str | None = Field(
        default=None, description="Teacher checkpoint path; '{seed}' expands per seed"
    )
    dataset: DatasetConfig = Field(default_factory=DatasetConfig)
    teacher: ModelConfig | None = None
    student: ModelConfig | None = None
    optimizer: OptimConfig = Field(default_factory=OptimConfig)
    loss: LossSpec = Field(default_factory=LossSpec)
    sampling: SamplingConfig = Field(default_factory=SamplingConfig)

    model_config = {"extra": "forbid"}

    @classmethod
    def from_toml(cls, path: Path) -> ExperimentConfig:
        with open(path, "rb") as f:
            return cls.model_validate(tomllib.load(f))

    def teacher_checkpoint_for(self, seed: int) -> Path | None:
        if self.teacher_checkpoint is None:
            return None
        return Path(self.teacher_checkpoint.replace("{seed}", str(seed)))

    def check(self, command: str) -> list[tuple[str, str]]:
        """Semantic problems for running `command`; reads the filesystem, writes nothing."""
        problems: list[tuple[str, str]] = []
        needs_data = command in ("train-teacher", "distill", "eval")
        if needs_data:
            for field_name, paths in self.dataset.paths().items():
                if not paths:
                    problems.append((f"dataset.{field_name}", "required for this dataset kind"))
                for p in paths:
                    if not Path(p).is_file():
                        problems.append((f"dataset.{field_name}", f"file not found: {p}"))

        roles = {
            "train-teacher": ("teacher",),
            "distill": ("teacher", "student"),
            "count-params": (),
        }.get(command, ())
        for role in roles:
            if getattr(self, role) is None:
                problems.append((role, "model section is required"))
        if command == "count-params" and self.teacher is None and self.student is None:
            problems.append(("teacher", "give a teacher and/or student model section"))

        specs = {}
        for role in ("teacher", "student"):
            section = getattr(self, role)
            if section is None:
                continue
            try:
                specs[role] = section.to_spec()
            except (ValueError, ValidationError) as e:
                problems.append((role, str(e)))
                continue
            from tripletkd.nn.model import infer_shapes

            try:
                infer_shapes(specs[role])
            except ValueError as e:
                problems.append((f"{role}.layers", str(e)))
            declared = self.dataset_num_classes()
            if needs_data and declared is not None and specs[role].num_classes != declared:
                problems.append(
                    (f"{role}.num_classes", "model output width differs from dataset classes")
                )

        if command == "distill":
            if "teacher" in specs and "student" in specs:
                if specs["teacher"].num_classes != specs["student"].num_classes:
                    problems.append(("student.num_classes", "teacher and student widths differ"))
            if self.teacher_checkpoint is None:
                problems.append(("teacher_checkpoint", "required for distill"))
            else:
                for seed in self.seeds:
                    path = self.teacher_checkpoint_for(seed)
                    if not path.is_file():
                        problems.append(("teacher_checkpoint", f"file not found: {path}"))
        return problems

    def dataset_num_classes(self) -> int | None:
        """Class count known before loading; IDX label files are only checked after load."""
        if self.dataset.kind == "synth_blobs":
            return self.dataset.classes
        if self.dataset.kind == "cifar10":
            return 10
        return None


def validation_problems(error: ValidationError) -> list[tuple[str, str]]:
    """Flatten a pydantic error into (dotted field path, message) pairs."""
    return [
        (".".join(str(part) for part in item["loc"]) or "<root>", item["msg"])
        for item in error.errors()
    ]


def _preset_weights(method: str, table: str) -> dict[LossKind, float]:
    if method not in METHODS:
        raise ValueError(f"unknown loss preset '{method}'. Available: {', '.join(METHODS)}")
    if table not in LOSS_WEIGHT_TABLES:
        raise ValueError(
            f"unknown weight table '{table}'. Available: {', '.join(LOSS_WEIGHT_TABLES)}"
        )
    weights = LOSS_WEIGHT_TABLES[table]
    return {kind: weights[kind] for kind in METHODS[method]}
