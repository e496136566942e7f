from __future__ import annotations


class TripletKDError(Exception):
    """Base class for every error raised by tripletkd."""


class ShapeError(TripletKDError, ValueError):
    """Tensor or layer shapes do not line up."""


class GraphError(TripletKDError, RuntimeError):
    """The recorded computation graph cannot be differentiated as asked."""


class DataFormatError(TripletKDError, ValueError):
    """A dataset or checkpoint file does not match its binary format."""

    def __init__(self, message: str, offset: int | None = None) -> None:
        if offset is not None:
            message = f"{message} (byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class LabelError(TripletKDError, ValueError):
    """A class label lies outside [0, num_classes)."""


class DegenerateBatchError(TripletKDError, ValueError):
    """A mini-batch cannot produce the index sets or distances a loss needs."""


class TrainingDivergedError(TripletKDError, RuntimeError):
    def __init__(self, epoch: int, step: int, value: float) -> None:
        super().__init__(
            f"loss became non-finite ({value}) at epoch {epoch}, step {step}; "
            "lower the learning rate or the loss weights"
        )
        self.epoch = epoch
        self.step = step
        self.value = value


class ConfigError(TripletKDError, ValueError):
    """Semantic configuration problems, each tagged with a dotted field path."""

    def __init__(self, problems: list[tuple[str, str]]) -> None:
        self.problems = problems
        lines = [f"{path}: {message}" for path, message in problems]
        super().__init__("invalid configuration:\n  " + "\n  ".join(lines))
