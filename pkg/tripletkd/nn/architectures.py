"""Named model layouts.

The small CIFAR-10 student and teacher, VGG11 and VGG19 with batchnorm sized for
64x64 inputs, and a plain MLP for feature vectors.
"""

from __future__ import annotations

from collections.abc import Callable, Sequence

from tripletkd.types.config import LayerSpec, ModelSpec
from tripletkd.types.models import LayerKind

RELU = LayerSpec(kind=LayerKind.RELU)
POOL = LayerSpec(kind=LayerKind.MAXPOOL2X2)
FLATTEN = LayerSpec(kind=LayerKind.FLATTEN)
BN = LayerSpec(kind=LayerKind.BATCHNORM2D)
DROPOUT = LayerSpec(kind=LayerKind.DROPOUT)

VGG11_FEATURES = [64, "M", 128, "M", 256, 256, "M", 512, 512, "M", 512, 512, "M"]
VGG19_FEATURES = [
    64, 64, "M",
    128, 128, "M",
    256, 256, 256, 256, "M",
    512, 512, 512, 512, "M",
    512, 512, 512, 512, "M",
]  # fmt: skip


def cifar_student(
    input_shape: Sequence[int] | None = None, num_classes: int | None = None, **_: object
) -> ModelSpec:
    conv = LayerSpec.conv
    return ModelSpec(
        input_shape=tuple(input_shape or (3, 32, 32)),
        num_classes=num_classes or 10,
        layers=[
            conv(32), RELU, POOL,
            conv(32), RELU, POOL,
            conv(64), RELU, POOL,
            FLATTEN,
            LayerSpec.linear(128), RELU,
            LayerSpec.linear(num_classes or 10),
        ],
    )  # fmt: skip


def cifar_teacher(
    input_shape: Sequence[int] | None = None,
    num_classes: int | None = None,
    dropout_rate: float = 0.5,
    **_: object,
) -> ModelSpec:
    conv = LayerSpec.conv
    # fully-connected(512) follows the last pooling stage through a flatten
    return ModelSpec(
        input_shape=tuple(input_shape or (3, 32, 32)),
        num_classes=num_classes or 10,
        dropout_rate=dropout_rate,
        layers=[
            conv(32), BN, RELU, POOL,
            conv(32), BN, RELU, POOL,
            conv(64), BN, RELU,
            conv(64), BN, RELU,
            conv(128), BN, RELU, POOL,
            FLATTEN,
            LayerSpec.linear(512), RELU, DROPOUT,
            LayerSpec.linear(128), RELU, DROPOUT,
            LayerSpec.linear(num_classes or 10),
        ],
    )  # fmt: skip


def vgg(
    features: Sequence[int | str],
    batchnorm: bool,
    input_shape: Sequence[int] | None = None,
    num_classes: int | None = None,
    dropout_rate: float = 0.5,
) -> ModelSpec:
    """VGG feature stack on (3, 64, 64) input with a 4096-4096 classifier, no adaptive pooling."""
    layers: list[LayerSpec] = []
    for item in features:
        if item == "M":
            layers.append(POOL)
            continue
        layers.append(LayerSpec.conv(int(item)))
        if batchnorm:
            layers.append(BN)
        layers.append(RELU)
    classes = num_classes or 200
    layers += [
        FLATTEN,
        LayerSpec.linear(4096), RELU, DROPOUT,
        LayerSpec.linear(4096), RELU, DROPOUT,
        LayerSpec.linear(classes),
    ]  # fmt: skip
    return ModelSpec(
        input_shape=tuple(input_shape or (3, 64, 64)),
        num_classes=classes,
        layers=layers,
        dropout_rate=dropout_rate,
    )


def vgg11(
    input_shape=None, num_classes=None, dropout_rate: float = 0.5, **_: object
) -> ModelSpec:
    return vgg(VGG11_FEATURES, False, input_shape, num_classes, dropout_rate)


def vgg19_bn(
    input_shape=None, num_classes=None, dropout_rate: float = 0.5, **_: object
) -> ModelSpec:
    return vgg(VGG19_FEATURES, True, input_shape, num_classes, dropout_rate)


def mlp(
    input_shape: Sequence[int] | None = None,
    num_classes: int | None = None,
    hidden: Sequence[int] = (),
    **_: object,
) -> ModelSpec:
    if not input_shape or num_classes is None:
        raise ValueError("the mlp preset needs input_shape and num_classes")
    layers: list[LayerSpec] = []
    if len(input_shape) > 1:
        layers.append(FLATTEN)
    for width in hidden:
        layers += [LayerSpec.linear(width), RELU]
    layers.append(LayerSpec.linear(num_classes))
    return ModelSpec(input_shape=tuple(input_shape), num_classes=num_classes, layers=layers)


_PRESETS: dict[str, Callable[..., ModelSpec]] = {
    "cifar-student": cifar_student,
    "cifar-teacher": cifar_teacher,
    "vgg11": vgg11,
    "vgg19-bn": vgg19_bn,
    "mlp": mlp,
}


def build_preset(name: str, **options: object) -> ModelSpec:
    """Look up an architecture preset by name and build its spec."""
    builder = _PRESETS.get(name)
    if builder is None:
        available = ", ".join(_PRESETS.keys())
        raise ValueError(f"Unknown architecture preset '{name}'. Available: {available}")
    return builder(**options)


def register_preset(name: str, builder: Callable[..., ModelSpec]) -> None:
    """Register a new architecture preset."""
    _PRESETS[name] = builder


def preset_names() -> list[str]:
    return list(_PRESETS)
