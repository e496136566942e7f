"""CIFAR-10 binary and IDX readers and writers.

CIFAR-10 records are 3073 bytes: one label byte, then the R, G and B planes of a
32x32 image, each row-major. IDX files start with two zero bytes, a type code and
a rank byte, followed by big-endian u32 extents and the raw data.
"""

from __future__ import annotations

import logging
import struct
from pathlib import Path

import numpy as np

from tripletkd.data.dataset import Dataset
from tripletkd.errors import DataFormatError

logger = logging.getLogger(__name__)

CIFAR_CLASSES = 10
CIFAR_IMAGE = (3, 32, 32)
CIFAR_RECORD = 1 + 3 * 32 * 32

IDX_UBYTE = 0x08
IDX_FLOAT64 = 0x0E
_IDX_DTYPES = {IDX_UBYTE: np.dtype(">u1"), IDX_FLOAT64: np.dtype(">f8")}


def load_cifar10_binary(*paths: Path, split: str = "train") -> Dataset:
    """Read one or more CIFAR-10 binary batch files; pixels are scaled to [0, 1]."""
    images, labels = [], []
    for path in paths:
        raw = Path(path).read_bytes()
        if not raw:
            raise DataFormatError(f"{path}: empty CIFAR-10 file", offset=0)
        if len(raw) % CIFAR_RECORD:
            raise DataFormatError(
                f"{path}: length {len(raw)} is not a multiple of {CIFAR_RECORD}",
                offset=len(raw) - len(raw) % CIFAR_RECORD,
            )
        records = np.frombuffer(raw, dtype=np.uint8).reshape(-1, CIFAR_RECORD)
        bad = np.flatnonzero(records[:, 0] >= CIFAR_CLASSES)
        if bad.size:
            raise DataFormatError(
                f"{path}: label {records[bad[0], 0]} out of range",
                offset=int(bad[0]) * CIFAR_RECORD,
            )
        labels.append(records[:, 0].astype(np.int64))
        images.append(records[:, 1:].reshape((-1, *CIFAR_IMAGE)))
        logger.info("loaded %d CIFAR-10 records from %s", len(records), path)
    pixels = np.concatenate(images) if images else np.zeros((0, *CIFAR_IMAGE), np.uint8)
    return Dataset(
        samples=pixels / 255.0,
        labels=np.concatenate(labels) if labels else np.zeros(0, np.int64),
        num_classes=CIFAR_CLASSES,
        split=split,
    )


def save_cifar10_binary(path: Path, dataset: Dataset) -> None:
    """Write a [0, 1]-scaled (N, 3, 32, 32) dataset back to CIFAR-10 records."""
    if dataset.sample_shape != CIFAR_IMAGE:
        raise DataFormatError(f"CIFAR-10 needs samples shaped {CIFAR_IMAGE}")
    pixels = _to_bytes(dataset.samples).reshape(len(dataset), -1)
    records = np.concatenate([dataset.labels.astype(np.uint8)[:, None], pixels], axis=1)
    Path(path).write_bytes(records.tobytes())


def read_idx(path: Path) -> np.ndarray:
    raw = Path(path).read_bytes()
    if len(raw) < 4:
        raise DataFormatError(f"{path}: too short for an IDX header", offset=len(raw))
    zero, code, rank = struct.unpack(">HBB", raw[:4])
    if zero != 0 or code not in _IDX_DTYPES:
        raise DataFormatError(f"{path}: bad IDX magic 0x{raw[:4].hex()}", offset=0)
    header_end = 4 + 4 * rank
    if len(raw) < header_end:
        raise DataFormatError(f"{path}: truncated IDX dimensions", offset=len(raw))
    shape = struct.unpack(f">{rank}I", raw[4:header_end])
    dtype = _IDX_DTYPES[code]
    expected = header_end + int(np.prod(shape, dtype=np.int64)) * dtype.itemsize
    if len(raw) != expected:
        raise DataFormatError(
            f"{path}: dimensions {shape} need {expected} bytes, file has {len(raw)}",
            offset=min(len(raw), expected),
        )
    return np.frombuffer(raw, dtype=dtype, offset=header_end).reshape(shape)


def write_idx(path: Path, array: np.ndarray) -> None:
    array = np.asarray(array)
    code = IDX_UBYTE if array.dtype == np.uint8 else IDX_FLOAT64
    header = struct.pack(f">HBB{array.ndim}I", 0, code, array.ndim, *array.shape)
    Path(path).write_bytes(header + array.astype(_IDX_DTYPES[code]).tobytes())


def load_idx(
    images_path: Path,
    labels_path: Path,
    num_classes: int | None = None,
    split: str = "train",
) -> Dataset:
    """Rank-3 images become (N, 1, H, W), rank-4 stay (N, C, H, W); byte pixels go to [0, 1].

    Labels must be a rank-1 byte file. `num_classes` defaults to max label + 1.
    """
    images = read_idx(images_path)
    labels = read_idx(labels_path)
    if images.dtype != _IDX_DTYPES[IDX_FLOAT64] and images.ndim not in (3, 4):
        raise DataFormatError(
            f"{images_path}: byte images need rank 3 (N, H, W) or 4 (N, C, H, W), "
            f"got rank {images.ndim}",
            offset=3,
        )
    if labels.ndim != 1 or labels.dtype != _IDX_DTYPES[IDX_UBYTE]:
        raise DataFormatError(f"{labels_path}: expected magic 0x00000801 for labels", offset=2)
    if len(images) != len(labels):
        raise DataFormatError(
            f"{len(images)} images but {len(labels)} labels in {labels_path}", offset=4
        )
    samples = images / 255.0 if images.dtype == _IDX_DTYPES[IDX_UBYTE] else images.astype(float)
    if samples.ndim == 3:
        samples = samples[:, None, :, :]
    labels = labels.astype(np.int64)
    classes = num_classes if num_classes is not None else int(labels.max(initial=-1)) + 1
    logger.info("loaded %d IDX records from %s", len(labels), images_path)
    return Dataset(
        samples=samples,
        labels=labels,
        num_classes=max(classes, 1),
        split=split,
        source_rank=images.ndim,
    )


def save_idx(
    images_path: Path, labels_path: Path, dataset: Dataset, as_bytes: bool = False
) -> None:
    """Export a dataset to an IDX image/label pair.

    With `as_bytes`, [0, 1] pixels are written as u8 (type 0x08); otherwise the raw
    float64 values are kept (type 0x0E). A single image channel is squeezed unless the
    dataset was read from a rank-4 file.
    """
    samples = dataset.samples
    if samples.ndim == 4 and samples.shape[1] == 1 and dataset.source_rank != 4:
        samples = samples[:, 0]
    write_idx(images_path, _to_bytes(samples) if as_bytes else samples)
    write_idx(labels_path, dataset.labels.astype(np.uint8))


def _to_bytes(values: np.ndarray) -> np.ndarray:
    return np.clip(np.rint(values * 255.0), 0, 255).astype(np.uint8)
