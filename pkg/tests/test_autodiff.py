import numpy as np
import pytest

from tripletkd.autodiff import (
    Tensor,
    finite_difference_gradient,
    no_grad,
    record_branches,
    trace,
    where,
)
from tripletkd.errors import GraphError


def test_square_gradient():
    x = Tensor(3.0, requires_grad=True)
    grads = (x * x).backward()
    assert grads[x] == pytest.approx(6.0)


def test_sum_gradient_is_all_ones():
    x = Tensor(np.arange(6.0).reshape(2, 3), requires_grad=True)
    grads = x.sum().backward()
    np.testing.assert_array_equal(grads[x], np.ones((2, 3)))


def test_relu_dead_region_has_zero_gradient():
    w = Tensor(2.0, requires_grad=True)
    grads = (w * -1.0).relu().backward()
    assert grads[w] == 0.0


def test_relu_gradient_at_zero_is_zero():
    x = Tensor(np.array([0.0, 1.0]), requires_grad=True)
    grads = x.relu().sum().backward()
    np.testing.assert_array_equal(grads[x], [0.0, 1.0])


def test_backward_needs_scalar():
    x = Tensor(np.ones(3), requires_grad=True)
    with pytest.raises(GraphError, match="scalar"):
        (x * 2.0).backward()


def test_constant_leaves_get_no_gradient():
    x = Tensor(np.ones(3), requires_grad=True)
    c = Tensor(np.full(3, 2.0))
    grads = (x * c).sum().backward()
    assert c not in grads
    np.testing.assert_array_equal(grads[x], [2.0, 2.0, 2.0])


def test_detached_value_receives_no_gradient():
    x = Tensor(np.array([1.0, 2.0]), requires_grad=True)
    grads = (x * x.detach()).sum().backward()
    np.testing.assert_array_equal(grads[x], [1.0, 2.0])


def test_no_grad_records_nothing():
    x = Tensor(np.ones(2), requires_grad=True)
    with no_grad():
        y = (x * 3.0).sum()
    assert not y.requires_grad
    assert y.backward() == {}


def test_shared_subexpression_accumulates():
    x = Tensor(2.0, requires_grad=True)
    y = x * 3.0
    grads = (y * y + y).backward()
    # d/dx (9x^2 + 3x) = 18x + 3
    assert grads[x] == pytest.approx(39.0)


def test_broadcast_gradient_is_reduced():
    x = Tensor(np.ones((4, 3)), requires_grad=True)
    b = Tensor(np.zeros(3), requires_grad=True)
    grads = (x + b).sum().backward()
    np.testing.assert_array_equal(grads[b], [4.0, 4.0, 4.0])


def test_backward_is_linear():
    rng = np.random.default_rng(3)
    data = rng.normal(size=5)

    def grad_of(fn):
        x = Tensor(data, requires_grad=True)
        return fn(x).backward()[x]

    e1 = lambda x: (x * x).sum()  # noqa: E731
    e2 = lambda x: x.exp().sum()  # noqa: E731
    combined = grad_of(lambda x: e1(x) * 2.0 + e2(x) * -0.5)
    np.testing.assert_allclose(combined, 2.0 * grad_of(e1) - 0.5 * grad_of(e2), rtol=1e-14)


def test_matmul_and_indexing_gradients():
    a = Tensor(np.array([[1.0, 2.0], [3.0, 4.0]]), requires_grad=True)
    v = Tensor(np.array([1.0, -1.0]))
    out = (a @ v)[np.array([1, 1])].sum()
    grads = out.backward()
    np.testing.assert_array_equal(grads[a], [[0.0, 0.0], [2.0, -2.0]])


def test_where_routes_gradient():
    x = Tensor(np.array([1.0, 2.0, 3.0]), requires_grad=True)
    grads = where(np.array([True, False, True]), x * 2.0, x * 5.0).sum().backward()
    np.testing.assert_array_equal(grads[x], [2.0, 5.0, 2.0])


def test_trace_is_topological():
    x = Tensor(np.ones(2), requires_grad=True)
    out = ((x * 2.0).exp() + x).sum()
    nodes = trace(out)
    assert nodes[-1].op == "sum"
    for node in nodes:
        assert all(i < node.index for i in node.inputs)


def test_record_branches_sees_kinks():
    x = Tensor(np.array([-1.0, 1.0]))
    with record_branches() as log:
        x.relu()
        x.abs()
    assert len(log) == 2
    np.testing.assert_array_equal(log[0], [False, True])


def test_finite_difference_square():
    grad = finite_difference_gradient(lambda x: (x * x).sum(), Tensor(np.array([3.0])))
    assert grad.data[0] == pytest.approx(6.0, abs=1e-9)


def test_finite_difference_constant_is_zero():
    grad = finite_difference_gradient(lambda x: 4.0, Tensor(np.ones((2, 2))))
    np.testing.assert_array_equal(grad.data, np.zeros((2, 2)))


def test_finite_difference_exp():
    grad = finite_difference_gradient(lambda x: x.exp().sum(), Tensor(np.zeros(2)))
    np.testing.assert_allclose(grad.data, [1.0, 1.0], atol=1e-8)


def test_finite_difference_rejects_nonpositive_eps():
    with pytest.raises(ValueError, match="eps"):
        finite_difference_gradient(lambda x: x.sum(), Tensor(np.ones(1)), eps=0.0)


def test_tensors_are_immutable():
    x = Tensor(np.ones(2))
    with pytest.raises(ValueError):
        x.data[0] = 5.0
