import numpy as np
import pytest

from tripletkd.autodiff import Tensor
from tripletkd.errors import DegenerateBatchError, ShapeError
from tripletkd.nn.layers import (
    batchnorm2d,
    conv2d,
    dropout,
    flatten,
    linear,
    log_softmax,
    maxpool2x2,
    relu,
    softmax,
)


def test_conv_identity_kernel():
    x = Tensor(np.arange(9.0).reshape(1, 3, 3))
    out = conv2d(x, Tensor(np.ones((1, 1, 1, 1))), Tensor(np.zeros(1)))
    np.testing.assert_array_equal(out.data, x.data)


def test_conv_all_ones_sums_window():
    out = conv2d(Tensor(np.ones((1, 3, 3))), Tensor(np.ones((1, 1, 3, 3))), Tensor(np.zeros(1)))
    assert out.shape == (1, 1, 1)
    assert out.data.item() == 9.0


def test_conv_zero_weights_gives_bias():
    x = Tensor(np.random.default_rng(0).normal(size=(2, 2, 4, 4)))
    out = conv2d(x, Tensor(np.zeros((3, 2, 3, 3))), Tensor(np.array([1.0, -2.0, 0.5])), padding=1)
    assert out.shape == (2, 3, 4, 4)
    np.testing.assert_array_equal(out.data[:, 1], np.full((2, 4, 4), -2.0))


def test_conv_matches_direct_summation():
    rng = np.random.default_rng(1)
    x, w, b = rng.normal(size=(2, 5, 4)), rng.normal(size=(3, 2, 2, 3)), rng.normal(size=3)
    out = conv2d(Tensor(x), Tensor(w), Tensor(b)).data
    assert out.shape == (3, 4, 2)
    for c in range(3):
        for p in range(4):
            for q in range(2):
                expected = (w[c] * x[:, p : p + 2, q : q + 3]).sum() + b[c]
                assert out[c, p, q] == pytest.approx(expected, abs=1e-12)


def test_conv_channel_mismatch():
    with pytest.raises(ShapeError, match="channels"):
        conv2d(Tensor(np.ones((1, 2, 4, 4))), Tensor(np.ones((1, 3, 3, 3))))


def test_conv_filter_larger_than_input():
    with pytest.raises(ShapeError, match="does not fit"):
        conv2d(Tensor(np.ones((1, 2, 2))), Tensor(np.ones((1, 1, 3, 3))))


def test_relu_values_and_idempotence():
    x = Tensor(np.array([-1.0, 0.0, 2.0]))
    np.testing.assert_array_equal(relu(x).data, [0.0, 0.0, 2.0])
    np.testing.assert_array_equal(relu(relu(x)).data, relu(x).data)


def test_maxpool_block_max():
    assert maxpool2x2(Tensor(np.array([[[1.0, 2.0], [3.0, 4.0]]]))).data.item() == 4.0


def test_maxpool_ramp():
    out = maxpool2x2(Tensor(np.arange(16.0).reshape(1, 4, 4)))
    np.testing.assert_array_equal(out.data, [[[5.0, 7.0], [13.0, 15.0]]])


def test_maxpool_drops_odd_edge():
    out = maxpool2x2(Tensor(np.ones((2, 3, 5, 3))))
    assert out.shape == (2, 3, 2, 1)


def test_maxpool_needs_two_by_two():
    with pytest.raises(ShapeError, match="H, W >= 2"):
        maxpool2x2(Tensor(np.ones((1, 1, 1, 4))))


def test_maxpool_gradient_goes_to_first_max():
    x = Tensor(np.array([[[[2.0, 2.0], [1.0, 0.0]]]]), requires_grad=True)
    grads = maxpool2x2(x).sum().backward()
    np.testing.assert_array_equal(grads[x][0, 0], [[1.0, 0.0], [0.0, 0.0]])


def test_linear():
    out = linear(Tensor(np.array([2.0, 3.0])), Tensor(np.array([[1.0, 1.0]])), Tensor([1.0]))
    np.testing.assert_array_equal(out.data, [6.0])
    x = Tensor(np.array([[1.0, -2.0]]))
    np.testing.assert_array_equal(linear(x, Tensor(np.eye(2)), Tensor(np.zeros(2))).data, x.data)


def test_linear_shape_mismatch():
    with pytest.raises(ShapeError):
        linear(Tensor(np.ones((1, 3))), Tensor(np.ones((2, 2))))


def test_flatten():
    assert flatten(Tensor(np.ones((4, 2, 3, 3)))).shape == (4, 18)


def _bn(x, gamma, beta, training=True):
    c = x.shape[1]
    mean, var = np.zeros(c), np.ones(c)
    out = batchnorm2d(Tensor(x), Tensor(gamma), Tensor(beta), mean, var, training)
    return out, mean, var


def test_batchnorm_hand_normalization():
    out, mean, var = _bn(np.array([[[[0.0]]], [[[2.0]]]]), np.ones(1), np.zeros(1))
    np.testing.assert_allclose(out.data.reshape(-1), [-1.0, 1.0], atol=1e-2)
    # running stats: momentum 0.1 toward mean 1 and unbiased variance 2
    assert mean[0] == pytest.approx(0.1)
    assert var[0] == pytest.approx(0.9 + 0.1 * 2.0)


def test_batchnorm_zero_gamma_gives_beta():
    x = np.random.default_rng(0).normal(size=(4, 2, 3, 3))
    out, _, _ = _bn(x, np.zeros(2), np.array([0.5, -1.0]))
    np.testing.assert_allclose(out.data[:, 1], -1.0)


def test_batchnorm_inference_uses_running_stats():
    x = np.full((1, 1, 2, 2), 3.0)
    out = batchnorm2d(
        Tensor(x), Tensor([2.0]), Tensor([1.0]), np.array([1.0]), np.array([4.0]), False, eps=0.0
    )
    np.testing.assert_allclose(out.data, np.full((1, 1, 2, 2), 3.0))


def test_batchnorm_single_value_channel_in_training():
    with pytest.raises(DegenerateBatchError):
        _bn(np.ones((1, 2, 1, 1)), np.ones(2), np.zeros(2))


def test_dropout_identity_cases():
    x = Tensor(np.ones(10))
    assert dropout(x, 0.0, training=True, rng=np.random.default_rng(0)) is x
    assert dropout(x, 0.5, training=False) is x


def test_dropout_preserves_mean():
    out = dropout(Tensor(np.ones(10_000)), 0.5, training=True, rng=np.random.default_rng(0))
    assert set(np.unique(out.data)) <= {0.0, 2.0}
    assert out.data.mean() == pytest.approx(1.0, rel=0.05)


def test_dropout_rate_range():
    with pytest.raises(ValueError, match="dropout rate"):
        dropout(Tensor(np.ones(3)), 1.0, training=True, rng=np.random.default_rng(0))


def test_softmax_values():
    np.testing.assert_allclose(softmax(Tensor([0.0, 0.0])).data, [0.5, 0.5])
    np.testing.assert_allclose(softmax(Tensor([2.0, 0.0])).data, [0.8808, 0.1192], atol=1e-4)


def test_softmax_sums_to_one_and_is_shift_invariant():
    x = np.random.default_rng(4).normal(size=(5, 7)) * 10
    p = softmax(Tensor(x)).data
    np.testing.assert_allclose(p.sum(axis=1), 1.0, atol=1e-12)
    np.testing.assert_allclose(softmax(Tensor(x + 123.0)).data, p, atol=1e-12)


def test_log_softmax_matches_log_of_softmax():
    x = np.random.default_rng(5).normal(size=(3, 4))
    np.testing.assert_allclose(log_softmax(Tensor(x)).data, np.log(softmax(Tensor(x)).data))
