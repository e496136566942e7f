from tripletkd.data.dataset import Dataset, batches, standardize
from tripletkd.data.loaders import (
    load_cifar10_binary,
    load_idx,
    read_idx,
    save_cifar10_binary,
    save_idx,
    write_idx,
)
from tripletkd.data.synthetic import synth_blobs, synth_split

__all__ = [
    "Dataset",
    "batches",
    "load_cifar10_binary",
    "load_idx",
    "read_idx",
    "save_cifar10_binary",
    "save_idx",
    "standardize",
    "synth_blobs",
    "synth_split",
    "write_idx",
]
