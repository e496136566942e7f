"""Layer operations on `Tensor`, each recorded for reverse-mode differentiation.

Image tensors are laid out (N, C, H, W); conv2d and maxpool2x2 also accept a single
(C, H, W) image and return an unbatched result.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from tripletkd.autodiff.tensor import Tensor, _note_branch, as_tensor
from tripletkd.errors import DegenerateBatchError, ShapeError

BN_EPS = 1e-5
BN_MOMENTUM = 0.1


def conv2d(x: Tensor, weight: Tensor, bias: Tensor | None = None, padding: int = 0) -> Tensor:
    """Valid cross-correlation of x with `weight` (C_out, C_in, convy, convx), plus bias.

    Output extent is H + 2*padding - convy + 1 by W + 2*padding - convx + 1.
    The activation is a separate relu layer.
    """
    if x.ndim == 3:
        return conv2d(x.reshape((1,) + x.shape), weight, bias, padding).reshape(
            (weight.shape[0],) + _conv_out_hw(x.shape[1:], weight.shape[2:], padding)
        )
    if x.ndim != 4 or weight.ndim != 4:
        raise ShapeError(f"conv2d expects (N,C,H,W) input and 4-d weight, got {x.shape}")
    n, c, h, w = x.shape
    c_out, c_in, kh, kw = weight.shape
    if c != c_in:
        raise ShapeError(f"conv2d input has {c} channels, weight expects {c_in}")
    ho, wo = _conv_out_hw((h, w), (kh, kw), padding)

    xp = np.pad(x.data, ((0, 0), (0, 0), (padding, padding), (padding, padding)))
    windows = sliding_window_view(xp, (kh, kw), axis=(2, 3))  # (N, C, Ho, Wo, kh, kw)
    w_data = weight.data
    out = np.tensordot(windows, w_data, axes=([1, 4, 5], [1, 2, 3])).transpose(0, 3, 1, 2)
    if bias is not None:
        out = out + bias.data[None, :, None, None]
    out = np.ascontiguousarray(out)

    def backward(g: np.ndarray):
        gw = np.tensordot(g, windows, axes=([0, 2, 3], [0, 2, 3]))
        gxp = np.zeros_like(xp)
        for r in range(kh):
            for s in range(kw):
                contrib = np.tensordot(g, w_data[:, :, r, s], axes=([1], [0]))
                gxp[:, :, r : r + ho, s : s + wo] += contrib.transpose(0, 3, 1, 2)
        gx = gxp[:, :, padding : padding + h, padding : padding + w]
        gb = g.sum(axis=(0, 2, 3))
        return gx, gw, gb

    parents = (x, weight) if bias is None else (x, weight, bias)
    return Tensor._node(out, parents, backward, "conv2d")


def relu(x: Tensor) -> Tensor:
    return as_tensor(x).relu()


def maxpool2x2(x: Tensor) -> Tensor:
    """Non-overlapping 2x2 max with stride 2; an odd trailing row/column is dropped."""
    if x.ndim == 3:
        pooled = maxpool2x2(x.reshape((1,) + x.shape))
        return pooled.reshape(pooled.shape[1:])
    n, c, h, w = x.shape
    if h < 2 or w < 2:
        raise ShapeError(f"maxpool2x2 needs H, W >= 2, got {h}x{w}")
    ho, wo = h // 2, w // 2
    blocks = (
        x.data[:, :, : 2 * ho, : 2 * wo]
        .reshape(n, c, ho, 2, wo, 2)
        .transpose(0, 1, 2, 4, 3, 5)
        .reshape(n, c, ho, wo, 4)
    )
    # first maximum wins on ties
    winner = blocks.argmax(axis=-1)
    _note_branch(winner)
    out = np.take_along_axis(blocks, winner[..., None], axis=-1)[..., 0]

    def backward(g: np.ndarray):
        gb = np.zeros((n, c, ho, wo, 4))
        np.put_along_axis(gb, winner[..., None], g[..., None], axis=-1)
        gx = np.zeros((n, c, h, w))
        gx[:, :, : 2 * ho, : 2 * wo] = (
            gb.reshape(n, c, ho, wo, 2, 2).transpose(0, 1, 2, 4, 3, 5).reshape(n, c, 2 * ho, 2 * wo)
        )
        return (gx,)

    return Tensor._node(out, (x,), backward, "maxpool2x2")


def linear(x: Tensor, weight: Tensor, bias: Tensor | None = None) -> Tensor:
    """x W^T + b with `weight` shaped (out, in)."""
    if x.shape[-1] != weight.shape[1]:
        raise ShapeError(f"linear input width {x.shape[-1]} does not match weight {weight.shape}")
    out = x @ weight.T
    return out + bias if bias is not None else out


def flatten(x: Tensor) -> Tensor:
    return x.reshape(x.shape[0], -1)


def batchnorm2d(
    x: Tensor,
    gamma: Tensor,
    beta: Tensor,
    running_mean: np.ndarray,
    running_var: np.ndarray,
    training: bool,
    momentum: float = BN_MOMENTUM,
    eps: float = BN_EPS,
) -> Tensor:
    """Per-channel normalization over (N, H, W), or over N for (N, C) input.

    In training mode the batch statistics are used and the running buffers are
    updated in place (running variance uses the unbiased estimate).
    """
    axes = (0, 2, 3) if x.ndim == 4 else (0,)
    shape = (1, -1, 1, 1) if x.ndim == 4 else (1, -1)
    g = gamma.reshape(shape)
    b = beta.reshape(shape)
    if not training:
        mean = Tensor(running_mean.reshape(shape))
        std = Tensor(np.sqrt(running_var + eps).reshape(shape))
        return (x - mean) / std * g + b

    count = int(np.prod([x.shape[ax] for ax in axes]))
    if count < 2:
        raise DegenerateBatchError("batchnorm2d in training mode needs >= 2 values per channel")
    mean = x.mean(axis=axes, keepdims=True)
    centered = x - mean
    var = (centered * centered).mean(axis=axes, keepdims=True)
    out = centered / (var + eps).sqrt() * g + b

    batch_var = var.data.reshape(-1) * count / (count - 1)
    running_mean *= 1.0 - momentum
    running_mean += momentum * mean.data.reshape(-1)
    running_var *= 1.0 - momentum
    running_var += momentum * batch_var
    return out


def dropout(
    x: Tensor, rate: float, training: bool, rng: np.random.Generator | None = None
) -> Tensor:
    """Inverted dropout: survivors are scaled by 1/(1-rate); identity outside training."""
    if not 0.0 <= rate < 1.0:
        raise ValueError(f"dropout rate must lie in [0, 1), got {rate}")
    if not training or rate == 0.0:
        return x
    if rng is None:
        raise ValueError("dropout in training mode needs an rng")
    mask = (rng.random(x.shape) >= rate) / (1.0 - rate)
    return x * Tensor(mask)


def softmax(x: Tensor, axis: int = -1) -> Tensor:
    # the shift is a constant; softmax is invariant to it
    shifted = x - Tensor(x.data.max(axis=axis, keepdims=True))
    e = shifted.exp()
    return e / e.sum(axis=axis, keepdims=True)


def log_softmax(x: Tensor, axis: int = -1) -> Tensor:
    shifted = x - Tensor(x.data.max(axis=axis, keepdims=True))
    return shifted - shifted.exp().sum(axis=axis, keepdims=True).log()


def _conv_out_hw(
    hw: tuple[int, ...], kernel: tuple[int, ...], padding: int
) -> tuple[int, int]:
    h, w = hw
    kh, kw = kernel
    ho, wo = h + 2 * padding - kh + 1, w + 2 * padding - kw + 1
    if ho < 1 or wo < 1:
        raise ShapeError(
            f"conv2d filter {kh}x{kw} does not fit a {h}x{w} input (padding {padding})"
        )
    return ho, wo
