import numpy as np
import pytest

from tripletkd.data.synthetic import synth_split
from tripletkd.nn.architectures import mlp


@pytest.fixture
def blobs():
    """Small, well separated 3-class blobs: (train, test)."""
    return synth_split(classes=3, per_class=40, test_per_class=20, dim=4, spread=0.1, seed=7)


@pytest.fixture
def student_spec():
    return mlp(input_shape=(4,), num_classes=3, hidden=[8])


@pytest.fixture
def teacher_spec():
    return mlp(input_shape=(4,), num_classes=3, hidden=[16, 16])


@pytest.fixture
def rng():
    return np.random.default_rng(0)
