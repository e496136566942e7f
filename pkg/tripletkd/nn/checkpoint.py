"""Flat binary checkpoint format.

    magic  b"DKPT"
    u32    version
    u32    tensor count
    per tensor:
        u16  name length, name bytes (utf-8)
        u8   rank, u32 extent per axis
        f64  data, row-major

All integers and floats are little-endian.
"""

from __future__ import annotations

import hashlib
import logging
import struct
from pathlib import Path

import numpy as np

from tripletkd.errors import DataFormatError

logger = logging.getLogger(__name__)

MAGIC = b"DKPT"
VERSION = 1


def encode_checkpoint(arrays: dict[str, np.ndarray]) -> bytes:
    chunks = [MAGIC, struct.pack("<II", VERSION, len(arrays))]
    for name, arr in arrays.items():
        raw_name = name.encode("utf-8")
        arr = np.asarray(arr, dtype=np.float64)
        chunks.append(struct.pack("<H", len(raw_name)))
        chunks.append(raw_name)
        chunks.append(struct.pack(f"<B{arr.ndim}I", arr.ndim, *arr.shape))
        chunks.append(np.ascontiguousarray(arr, dtype="<f8").tobytes())
    return b"".join(chunks)


def decode_checkpoint(raw: bytes) -> dict[str, np.ndarray]:
    reader = _Reader(raw)
    if reader.take(4, "magic") != MAGIC:
        raise DataFormatError("not a DKPT checkpoint: bad magic", offset=0)
    version, count = reader.unpack("<II", "header")
    if version != VERSION:
        raise DataFormatError(f"unsupported checkpoint version {version}", offset=4)

    arrays: dict[str, np.ndarray] = {}
    for _ in range(count):
        (name_len,) = reader.unpack("<H", "name length")
        name = reader.take(name_len, "name").decode("utf-8")
        (rank,) = reader.unpack("<B", "rank")
        shape = reader.unpack(f"<{rank}I", "extents")
        size = int(np.prod(shape, dtype=np.int64))
        data = reader.take(8 * size, f"data of {name}")
        arrays[name] = np.frombuffer(data, dtype="<f8").astype(np.float64).reshape(shape)
    if reader.offset != len(raw):
        raise DataFormatError("trailing bytes after last tensor", offset=reader.offset)
    return arrays


def save_checkpoint(path: Path, arrays: dict[str, np.ndarray]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(encode_checkpoint(arrays))
    logger.info("wrote checkpoint %s (%d tensors)", path, len(arrays))


def load_checkpoint(path: Path) -> dict[str, np.ndarray]:
    return decode_checkpoint(Path(path).read_bytes())


def file_digest(path: Path) -> str:
    """sha256 of the file bytes."""
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


class _Reader:
    def __init__(self, raw: bytes) -> None:
        self.raw = raw
        self.offset = 0

    def take(self, n: int, what: str) -> bytes:
        end = self.offset + n
        if end > len(self.raw):
            raise DataFormatError(f"truncated checkpoint while reading {what}", offset=self.offset)
        chunk = self.raw[self.offset : end]
        self.offset = end
        return chunk

    def unpack(self, fmt: str, what: str) -> tuple:
        return struct.unpack(fmt, self.take(struct.calcsize(fmt), what))
