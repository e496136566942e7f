from __future__ import annotations

import logging

import numpy as np

from tripletkd.data.dataset import Dataset
from tripletkd.errors import ConfigError

logger = logging.getLogger(__name__)

MAX_REJECTIONS = 10_000


def blob_centers(classes: int, dim: int, spread: float, rng: np.random.Generator) -> np.ndarray:
    """Points on the unit sphere at least 2*spread apart, placed by rejection."""
    centers: list[np.ndarray] = []
    rejections = 0
    while len(centers) < classes:
        v = rng.standard_normal(dim)
        v /= np.linalg.norm(v)
        if all(np.linalg.norm(v - c) >= 2.0 * spread for c in centers):
            centers.append(v)
            continue
        rejections += 1
        if rejections >= MAX_REJECTIONS:
            raise ConfigError(
                [
                    (
                        "dataset.spread",
                        f"could not place {classes} centers {2 * spread:.3g} apart in "
                        f"{dim} dimensions; use a smaller spread",
                    )
                ]
            )
    return np.stack(centers)


def synth_blobs(classes: int, per_class: int, dim: int, spread: float, seed: int) -> Dataset:
    """Gaussian clusters with standard deviation `spread` around seeded centers."""
    train, _ = synth_split(classes, per_class, 0, dim, spread, seed)
    return train


def synth_split(
    classes: int,
    per_class: int,
    test_per_class: int,
    dim: int,
    spread: float,
    seed: int,
) -> tuple[Dataset, Dataset | None]:
    """Train and test blobs sharing one set of centers; test is None for test_per_class=0.

    Centers, train noise and test noise come from separate streams of `seed`. The test
    split does not depend on `per_class`, and a smaller training set is a per-class
    prefix of a larger one, so a teacher fitted on many samples and a student fitted
    on few are scored on the same held-out points.
    """
    if classes < 2 or dim < 2:
        raise ConfigError([("dataset", "synth_blobs needs classes >= 2 and dim >= 2")])
    centers = blob_centers(classes, dim, spread, np.random.default_rng(seed))
    train_stream, test_stream = (
        np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(2)
    )

    train = _draw(centers, per_class, spread, train_stream, "train")
    test = _draw(centers, test_per_class, spread, test_stream, "test") if test_per_class else None
    total = per_class + test_per_class
    logger.info("generated %d blob samples in %d classes (dim %d)", classes * total, classes, dim)
    return train, test


def _draw(
    centers: np.ndarray, per_class: int, spread: float, rng: np.random.Generator, split: str
) -> Dataset:
    classes, dim = centers.shape
    # sample-major draw: row i of every class is fixed regardless of per_class
    noise = rng.standard_normal((per_class, classes, dim)).transpose(1, 0, 2) * spread
    points = centers[:, None, :] + noise
    labels = np.repeat(np.arange(classes), per_class)
    return Dataset(points.reshape(-1, dim), labels, classes, split)
