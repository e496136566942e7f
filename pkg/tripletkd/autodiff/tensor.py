from __future__ import annotations

import itertools
from collections.abc import Callable, Iterator, Sequence
from contextlib import contextmanager
from contextvars import ContextVar
from dataclasses import dataclass

import numpy as np

from tripletkd.errors import GraphError

BackwardFn = Callable[[np.ndarray], Sequence[np.ndarray | None]]

_creation_order = itertools.count()
_grad_enabled: ContextVar[bool] = ContextVar("grad_enabled", default=True)
_branch_log: ContextVar[list[np.ndarray] | None] = ContextVar("branch_log", default=None)


class Tensor:
    """Dense float64 array that records the operations applied to it.

    Every operation on a tensor that requires grad appends a node to an implicit,
    append-only graph: the node keeps references to its inputs and a closure over
    the forward values it needs. Nodes are numbered at creation, so the creation
    order is a topological order and `backward` walks it in reverse.
    """

    __slots__ = ("data", "requires_grad", "name", "_op", "_parents", "_backward", "_seq")
    # numpy defers mixed ndarray/Tensor arithmetic to the Tensor operators
    __array_ufunc__ = None

    def __init__(self, data, requires_grad: bool = False, name: str | None = None) -> None:
        arr = np.array(data, dtype=np.float64)
        arr.flags.writeable = False
        self.data = arr
        self.requires_grad = requires_grad
        self.name = name
        self._op = "leaf"
        self._parents: tuple[Tensor, ...] = ()
        self._backward: BackwardFn | None = None
        self._seq = next(_creation_order)

    @classmethod
    def _node(
        cls,
        data: np.ndarray,
        parents: Sequence[Tensor],
        backward: BackwardFn,
        op: str,
    ) -> Tensor:
        out = cls.__new__(cls)
        arr = np.asarray(data, dtype=np.float64)
        arr.flags.writeable = False
        out.data = arr
        out.name = None
        out._seq = next(_creation_order)
        tracked = _grad_enabled.get() and any(p.requires_grad for p in parents)
        out.requires_grad = tracked
        out._op = op
        out._parents = tuple(parents) if tracked else ()
        out._backward = backward if tracked else None
        return out

    # -- basic properties -------------------------------------------------

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def op(self) -> str:
        return self._op

    @property
    def T(self) -> Tensor:
        return self.transpose()

    def item(self) -> float:
        if self.data.size != 1:
            raise GraphError(f"item() needs a single-element tensor, got shape {self.shape}")
        return float(self.data.reshape(-1)[0])

    def numpy(self) -> np.ndarray:
        return self.data.copy()

    def detach(self) -> Tensor:
        """Return a constant view of this value; nothing flows back through it."""
        return Tensor(self.data)

    def __len__(self) -> int:
        return self.data.shape[0]

    def __repr__(self) -> str:
        grad = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}, op={self._op}{grad})"

    # -- reverse mode -----------------------------------------------------

    def backward(self) -> dict[Tensor, np.ndarray]:
        """Differentiate this scalar with respect to every leaf that requires grad.

        Returns a mapping leaf -> gradient array. Constant leaves are absent.
        Gradients are summed in reverse creation order, which fixes the
        floating-point accumulation order for a given graph.
        """
        if self.data.size != 1:
            raise GraphError(f"backward needs a scalar output, got shape {self.shape}")
        if not self.requires_grad:
            return {}

        grads: dict[Tensor, np.ndarray] = {self: np.ones_like(self.data)}
        leaves: dict[Tensor, np.ndarray] = {}
        for node in _reachable(self):
            g = grads.pop(node, None)
            if g is None:
                continue
            if node._backward is None:
                leaves[node] = g
                continue
            for parent, pg in zip(node._parents, node._backward(g)):
                if pg is None or not parent.requires_grad:
                    continue
                if parent in grads:
                    grads[parent] = grads[parent] + pg
                else:
                    grads[parent] = pg
        return leaves

    # -- arithmetic -------------------------------------------------------

    def __add__(self, other) -> Tensor:
        other = as_tensor(other)
        a_shape, b_shape = self.shape, other.shape

        def backward(g: np.ndarray):
            return _unbroadcast(g, a_shape), _unbroadcast(g, b_shape)

        return Tensor._node(self.data + other.data, (self, other), backward, "add")

    __radd__ = __add__

    def __sub__(self, other) -> Tensor:
        other = as_tensor(other)
        a_shape, b_shape = self.shape, other.shape

        def backward(g: np.ndarray):
            return _unbroadcast(g, a_shape), _unbroadcast(-g, b_shape)

        return Tensor._node(self.data - other.data, (self, other), backward, "sub")

    def __rsub__(self, other) -> Tensor:
        return as_tensor(other) - self

    def __mul__(self, other) -> Tensor:
        other = as_tensor(other)
        a, b = self.data, other.data

        def backward(g: np.ndarray):
            return _unbroadcast(g * b, a.shape), _unbroadcast(g * a, b.shape)

        return Tensor._node(a * b, (self, other), backward, "mul")

    __rmul__ = __mul__

    def __truediv__(self, other) -> Tensor:
        other = as_tensor(other)
        a, b = self.data, other.data

        def backward(g: np.ndarray):
            return _unbroadcast(g / b, a.shape), _unbroadcast(-g * a / (b * b), b.shape)

        return Tensor._node(a / b, (self, other), backward, "div")

    def __rtruediv__(self, other) -> Tensor:
        return as_tensor(other) / self

    def __neg__(self) -> Tensor:
        return Tensor._node(-self.data, (self,), lambda g: (-g,), "neg")

    def __pow__(self, exponent: float) -> Tensor:
        a = self.data
        p = float(exponent)

        def backward(g: np.ndarray):
            return (g * p * a ** (p - 1.0),)

        return Tensor._node(a**p, (self,), backward, "pow")

    def __matmul__(self, other) -> Tensor:
        other = as_tensor(other)
        a, b = self.data, other.data
        if a.ndim not in (1, 2) or b.ndim not in (1, 2):
            raise GraphError("matmul supports vectors and matrices only")
        a2 = a if a.ndim == 2 else a[None, :]
        b2 = b if b.ndim == 2 else b[:, None]

        def backward(g: np.ndarray):
            g2 = np.reshape(g, (a2.shape[0], b2.shape[1]))
            return (g2 @ b2.T).reshape(a.shape), (a2.T @ g2).reshape(b.shape)

        return Tensor._node(a @ b, (self, other), backward, "matmul")

    # -- reductions and shape ---------------------------------------------

    def sum(self, axis: int | tuple[int, ...] | None = None, keepdims: bool = False) -> Tensor:
        shape = self.shape

        def backward(g: np.ndarray):
            if axis is not None and not keepdims:
                g = np.expand_dims(g, axis)
            return (np.broadcast_to(g, shape).copy(),)

        return Tensor._node(self.data.sum(axis=axis, keepdims=keepdims), (self,), backward, "sum")

    def mean(self, axis: int | tuple[int, ...] | None = None, keepdims: bool = False) -> Tensor:
        if axis is None:
            count = self.size
        else:
            axes = (axis,) if isinstance(axis, int) else axis
            count = int(np.prod([self.shape[ax] for ax in axes]))
        return self.sum(axis=axis, keepdims=keepdims) * (1.0 / count)

    def reshape(self, *shape) -> Tensor:
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        original = self.shape
        return Tensor._node(
            self.data.reshape(shape), (self,), lambda g: (g.reshape(original),), "reshape"
        )

    def transpose(self, *axes: int) -> Tensor:
        order = axes or tuple(reversed(range(self.ndim)))
        inverse = np.argsort(order)
        return Tensor._node(
            self.data.transpose(order), (self,), lambda g: (g.transpose(inverse),), "transpose"
        )

    def __getitem__(self, key) -> Tensor:
        shape = self.shape

        def backward(g: np.ndarray):
            out = np.zeros(shape)
            np.add.at(out, key, g)
            return (out,)

        return Tensor._node(self.data[key], (self,), backward, "index")

    # -- elementwise functions --------------------------------------------

    def exp(self) -> Tensor:
        out = np.exp(self.data)
        return Tensor._node(out, (self,), lambda g: (g * out,), "exp")

    def log(self) -> Tensor:
        a = self.data
        return Tensor._node(np.log(a), (self,), lambda g: (g / a,), "log")

    def sqrt(self) -> Tensor:
        out = np.sqrt(self.data)
        live = out > 0
        _note_branch(live)

        def backward(g: np.ndarray):
            safe = np.where(live, out, 1.0)
            return (np.where(live, g * 0.5 / safe, 0.0),)

        return Tensor._node(out, (self,), backward, "sqrt")

    def abs(self) -> Tensor:
        sign = np.sign(self.data)
        _note_branch(sign)
        return Tensor._node(np.abs(self.data), (self,), lambda g: (g * sign,), "abs")

    def relu(self) -> Tensor:
        active = self.data > 0
        _note_branch(active)
        return Tensor._node(
            np.where(active, self.data, 0.0), (self,), lambda g: (g * active,), "relu"
        )

    def clamp_min(self, floor: float) -> Tensor:
        keep = self.data > floor
        _note_branch(keep)
        return Tensor._node(
            np.where(keep, self.data, floor), (self,), lambda g: (g * keep,), "clamp_min"
        )


@dataclass(frozen=True)
class GraphNode:
    """One recorded operation, as seen by `trace`."""

    index: int
    op: str
    inputs: tuple[int, ...]
    shape: tuple[int, ...]
    constant: bool


def as_tensor(value) -> Tensor:
    return value if isinstance(value, Tensor) else Tensor(value)


def where(condition, a, b) -> Tensor:
    """Pick `a` where `condition` holds, else `b`. The condition is a constant mask."""
    cond = np.asarray(condition, dtype=bool)
    a, b = as_tensor(a), as_tensor(b)
    _note_branch(cond)
    a_shape, b_shape = a.shape, b.shape

    def backward(g: np.ndarray):
        return (
            _unbroadcast(np.where(cond, g, 0.0), a_shape),
            _unbroadcast(np.where(cond, 0.0, g), b_shape),
        )

    return Tensor._node(np.where(cond, a.data, b.data), (a, b), backward, "where")


def trace(output: Tensor) -> list[GraphNode]:
    """List the graph behind `output` in topological (creation) order."""
    nodes = list(reversed(_reachable(output)))
    position = {node: i for i, node in enumerate(nodes)}
    return [
        GraphNode(
            index=i,
            op=node._op,
            inputs=tuple(position[p] for p in node._parents if p in position),
            shape=node.shape,
            constant=not node.requires_grad,
        )
        for i, node in enumerate(nodes)
    ]


@contextmanager
def no_grad() -> Iterator[None]:
    """Evaluate without recording: every result is a constant."""
    token = _grad_enabled.set(False)
    try:
        yield
    finally:
        _grad_enabled.reset(token)


@contextmanager
def record_branches() -> Iterator[list[np.ndarray]]:
    """Collect the branch masks of every kinked op (relu, abs, max, hinge) evaluated inside."""
    log: list[np.ndarray] = []
    token = _branch_log.set(log)
    try:
        yield log
    finally:
        _branch_log.reset(token)


def _note_branch(mask: np.ndarray) -> None:
    log = _branch_log.get()
    if log is not None:
        log.append(np.array(mask, copy=True))


def _reachable(root: Tensor) -> list[Tensor]:
    """Nodes feeding `root` that require grad, newest first."""
    seen = {root}
    stack = [root]
    while stack:
        node = stack.pop()
        for parent in node._parents:
            if parent.requires_grad and parent not in seen:
                seen.add(parent)
                stack.append(parent)
    return sorted(seen, key=lambda n: n._seq, reverse=True)


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, extent in enumerate(shape):
        if extent == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad
