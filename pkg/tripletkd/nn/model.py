from __future__ import annotations

import hashlib
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from tripletkd.autodiff.tensor import Tensor, as_tensor
from tripletkd.errors import ShapeError
from tripletkd.nn import layers
from tripletkd.types.config import LayerSpec, ModelSpec
from tripletkd.types.models import LayerKind

logger = logging.getLogger(__name__)

Shape = tuple[int, ...]


@dataclass(frozen=True)
class ParamShape:
    name: str
    shape: Shape
    trainable: bool = True
    decay: bool = False


@dataclass
class ParamStore:
    """Named parameter arrays of one model.

    `params` are trainable; `buffers` hold batchnorm running statistics, which are
    saved in checkpoints but never counted or differentiated. `decay` names the
    conv/linear weights that receive weight decay.
    """

    params: dict[str, np.ndarray] = field(default_factory=dict)
    buffers: dict[str, np.ndarray] = field(default_factory=dict)
    decay: set[str] = field(default_factory=set)

    @property
    def trainable_count(self) -> int:
        return sum(int(arr.size) for arr in self.params.values())

    def state(self) -> dict[str, np.ndarray]:
        """Every array, trainable and buffer, in layer order."""
        merged = {**self.params, **self.buffers}
        return {name: merged[name] for name in sorted(merged, key=_layer_order)}

    def load_state(self, arrays: dict[str, np.ndarray]) -> None:
        expected = self.state()
        missing = sorted(set(expected) - set(arrays), key=_layer_order)
        unexpected = sorted(set(arrays) - set(expected))
        if missing or unexpected:
            raise ShapeError(
                f"checkpoint does not match model: missing {missing}, unexpected {unexpected}"
            )
        for name, current in expected.items():
            if arrays[name].shape != current.shape:
                raise ShapeError(
                    f"{name}: checkpoint shape {arrays[name].shape} != model shape {current.shape}"
                )
        for name, arr in arrays.items():
            target = self.params if name in self.params else self.buffers
            target[name] = np.array(arr, dtype=np.float64)

    def digest(self) -> str:
        h = hashlib.sha256()
        for name, arr in self.state().items():
            h.update(name.encode())
            h.update(np.ascontiguousarray(arr, dtype="<f8").tobytes())
        return h.hexdigest()


def infer_shapes(spec: ModelSpec) -> list[Shape]:
    """Per-sample output shape of every layer; raises ShapeError naming the first bad layer."""
    shapes: list[Shape] = []
    shape: Shape = tuple(spec.input_shape)
    for i, layer in enumerate(spec.layers):
        shape = _layer_output_shape(i, layer, shape, spec)
        shapes.append(shape)
    if shape != (spec.num_classes,):
        raise ShapeError(
            f"model output shape {shape} does not match num_classes={spec.num_classes}"
        )
    return shapes


def param_shapes(spec: ModelSpec) -> list[ParamShape]:
    entries: list[ParamShape] = []
    shape: Shape = tuple(spec.input_shape)
    for i, layer in enumerate(spec.layers):
        prefix = f"layers.{i}"
        if layer.kind is LayerKind.CONV2D:
            kh, kw = layer.kernel
            weight = (layer.channels, shape[0], kh, kw)
            entries.append(ParamShape(f"{prefix}.weight", weight, decay=True))
            entries.append(ParamShape(f"{prefix}.bias", (layer.channels,)))
        elif layer.kind is LayerKind.LINEAR:
            entries.append(ParamShape(f"{prefix}.weight", (layer.units, shape[0]), decay=True))
            entries.append(ParamShape(f"{prefix}.bias", (layer.units,)))
        elif layer.kind is LayerKind.BATCHNORM2D:
            c = (shape[0],)
            entries.append(ParamShape(f"{prefix}.gamma", c))
            entries.append(ParamShape(f"{prefix}.beta", c))
            entries.append(ParamShape(f"{prefix}.running_mean", c, trainable=False))
            entries.append(ParamShape(f"{prefix}.running_var", c, trainable=False))
        shape = _layer_output_shape(i, layer, shape, spec)
    return entries


def count_params(spec: ModelSpec) -> int:
    """Exact trainable parameter count; batchnorm contributes gamma and beta only."""
    infer_shapes(spec)
    return sum(math.prod(p.shape) for p in param_shapes(spec) if p.trainable)


class Model:
    """A ModelSpec bound to its parameters."""

    def __init__(self, spec: ModelSpec, store: ParamStore) -> None:
        self.spec = spec
        self.store = store
        self.shapes = infer_shapes(spec)

    @classmethod
    def build(cls, spec: ModelSpec, seed: int = 0) -> Model:
        """Glorot-uniform weights, zero biases and beta, unit gamma; seeded."""
        infer_shapes(spec)
        rng = np.random.default_rng(seed)
        store = ParamStore()
        for p in param_shapes(spec):
            kind = p.name.rsplit(".", 1)[1]
            if kind == "weight":
                receptive = math.prod(p.shape[2:])
                fan_in, fan_out = p.shape[1] * receptive, p.shape[0] * receptive
                bound = math.sqrt(6.0 / (fan_in + fan_out))
                arr = rng.uniform(-bound, bound, size=p.shape)
            elif kind in ("gamma", "running_var"):
                arr = np.ones(p.shape)
            else:
                arr = np.zeros(p.shape)
            if p.trainable:
                store.params[p.name] = arr
            else:
                store.buffers[p.name] = arr
            if p.decay:
                store.decay.add(p.name)
        model = cls(spec, store)
        logger.debug("built model with %d trainable parameters", store.trainable_count)
        return model

    @property
    def num_classes(self) -> int:
        return self.spec.num_classes

    def count_params(self) -> int:
        return self.store.trainable_count

    def leaves(self) -> dict[str, Tensor]:
        """Fresh differentiable leaves for every trainable parameter."""
        return {
            name: Tensor(arr, requires_grad=True, name=name)
            for name, arr in self.store.params.items()
        }

    def forward(
        self,
        x: Tensor | np.ndarray,
        training: bool = False,
        rng: np.random.Generator | None = None,
        params: dict[str, Tensor] | None = None,
    ) -> Tensor:
        """Logits for a batch shaped (N, *input_shape).

        Without `params` the stored arrays enter as constants. Batchnorm running
        statistics are updated in place when `training` is set.
        """
        x = as_tensor(x)
        expected = tuple(self.spec.input_shape)
        if x.shape[1:] != expected:
            raise ShapeError(f"input: batch shape {x.shape} does not match model input {expected}")
        if params is None:
            params = {name: Tensor(arr) for name, arr in self.store.params.items()}

        h = x
        for i, layer in enumerate(self.spec.layers):
            prefix = f"layers.{i}"
            kind = layer.kind
            if kind is LayerKind.CONV2D:
                h = layers.conv2d(
                    h, params[f"{prefix}.weight"], params[f"{prefix}.bias"], layer.padding
                )
            elif kind is LayerKind.LINEAR:
                h = layers.linear(h, params[f"{prefix}.weight"], params[f"{prefix}.bias"])
            elif kind is LayerKind.RELU:
                h = layers.relu(h)
            elif kind is LayerKind.MAXPOOL2X2:
                h = layers.maxpool2x2(h)
            elif kind is LayerKind.FLATTEN:
                h = layers.flatten(h)
            elif kind is LayerKind.SOFTMAX:
                h = layers.softmax(h)
            elif kind is LayerKind.DROPOUT:
                h = layers.dropout(h, _dropout_rate(layer, self.spec), training, rng)
            elif kind is LayerKind.BATCHNORM2D:
                h = layers.batchnorm2d(
                    h,
                    params[f"{prefix}.gamma"],
                    params[f"{prefix}.beta"],
                    self.store.buffers[f"{prefix}.running_mean"],
                    self.store.buffers[f"{prefix}.running_var"],
                    training,
                    momentum=self.spec.bn_momentum,
                    eps=self.spec.bn_eps,
                )
        return h

    def predict(self, x: Tensor | np.ndarray) -> np.ndarray:
        """Argmax class per row in inference mode; ties go to the lowest index."""
        return self.forward(x).data.argmax(axis=1)


def _dropout_rate(layer: LayerSpec, spec: ModelSpec) -> float:
    return spec.dropout_rate if layer.rate is None else layer.rate


def _layer_output_shape(i: int, layer: LayerSpec, shape: Shape, spec: ModelSpec) -> Shape:
    kind = layer.kind

    def fail(message: str) -> ShapeError:
        return ShapeError(f"layer {i} ({kind.value}): {message}")

    if kind is LayerKind.CONV2D:
        if len(shape) != 3:
            raise fail(f"expects (C, H, W) input, got {shape}")
        c, h, w = shape
        kh, kw = layer.kernel
        ho, wo = h + 2 * layer.padding - kh + 1, w + 2 * layer.padding - kw + 1
        if ho < 1 or wo < 1:
            raise fail(f"filter {kh}x{kw} does not fit input {h}x{w} with padding {layer.padding}")
        return (layer.channels, ho, wo)
    if kind is LayerKind.MAXPOOL2X2:
        if len(shape) != 3:
            raise fail(f"expects (C, H, W) input, got {shape}")
        c, h, w = shape
        if h < 2 or w < 2:
            raise fail(f"needs H, W >= 2, got {h}x{w}")
        return (c, h // 2, w // 2)
    if kind is LayerKind.LINEAR:
        if len(shape) != 1:
            raise fail(f"expects a flat input, got {shape}; add a flatten layer")
        return (layer.units,)
    if kind is LayerKind.FLATTEN:
        return (math.prod(shape),)
    if kind is LayerKind.BATCHNORM2D:
        if len(shape) not in (1, 3):
            raise fail(f"expects (C, H, W) or (C,) input, got {shape}")
        return shape
    if kind is LayerKind.DROPOUT:
        rate = _dropout_rate(layer, spec)
        if not 0.0 <= rate < 1.0:
            raise fail(f"rate must lie in [0, 1), got {rate}")
    return shape


def _layer_order(name: str) -> tuple[int, str]:
    _, index, rest = name.split(".", 2)
    return int(index), rest
