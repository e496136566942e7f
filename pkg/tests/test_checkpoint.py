import struct

import numpy as np
import pytest

from tripletkd.errors import DataFormatError
from tripletkd.nn import Model, load_checkpoint, save_checkpoint
from tripletkd.nn.checkpoint import decode_checkpoint, encode_checkpoint, file_digest


def test_layout_of_single_tensor():
    raw = encode_checkpoint({"w": np.array([[1.0, 2.0]])})
    expected = (
        b"DKPT"
        + struct.pack("<II", 1, 1)
        + struct.pack("<H", 1)
        + b"w"
        + struct.pack("<BII", 2, 1, 2)
        + struct.pack("<2d", 1.0, 2.0)
    )
    assert raw == expected


def test_model_state_survives_file(tmp_path, teacher_spec):
    model = Model.build(teacher_spec, seed=4)
    path = tmp_path / "teacher" / "checkpoint.dkpt"
    save_checkpoint(path, model.store.state())

    restored = Model.build(teacher_spec, seed=99)
    restored.store.load_state(load_checkpoint(path))
    assert restored.store.digest() == model.store.digest()
    x = np.random.default_rng(0).normal(size=(3, 4))
    assert np.array_equal(restored.forward(x).data, model.forward(x).data)


def test_batchnorm_buffers_are_saved(tmp_path):
    from tripletkd.nn import build_preset

    state = Model.build(build_preset("cifar-teacher")).store.state()
    assert "layers.1.running_mean" in state
    assert "layers.1.running_var" in state
    assert list(decode_checkpoint(encode_checkpoint(state))) == list(state)


def test_bit_exact_values():
    values = np.array([np.pi, -0.0, 1e-300, np.finfo(float).max])
    back = decode_checkpoint(encode_checkpoint({"v": values}))["v"]
    assert back.tobytes() == values.tobytes()


def test_scalar_and_empty_names():
    back = decode_checkpoint(encode_checkpoint({"": np.array(3.5)}))
    assert back[""].shape == ()
    assert back[""] == 3.5


def test_bad_magic():
    with pytest.raises(DataFormatError, match="bad magic") as info:
        decode_checkpoint(b"NOPE" + bytes(8))
    assert info.value.offset == 0


def test_unsupported_version():
    with pytest.raises(DataFormatError, match="version 2"):
        decode_checkpoint(b"DKPT" + struct.pack("<II", 2, 0))


def test_truncated_data():
    raw = encode_checkpoint({"w": np.ones(4)})
    with pytest.raises(DataFormatError, match="data of w") as info:
        decode_checkpoint(raw[:-3])
    assert info.value.offset == len(raw) - 32


def test_trailing_bytes():
    raw = encode_checkpoint({"w": np.ones(2)})
    with pytest.raises(DataFormatError, match="trailing"):
        decode_checkpoint(raw + b"\x00")


def test_file_digest_tracks_content(tmp_path):
    path = tmp_path / "a.dkpt"
    save_checkpoint(path, {"w": np.ones(2)})
    before = file_digest(path)
    assert file_digest(path) == before
    save_checkpoint(path, {"w": np.zeros(2)})
    assert file_digest(path) != before
