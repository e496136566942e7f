from __future__ import annotations

import logging
from collections.abc import Callable, Mapping
from dataclasses import dataclass, field

import numpy as np

from tripletkd.autodiff.tensor import Tensor, record_branches

logger = logging.getLogger(__name__)

REL_DENOMINATOR_FLOOR = 1e-8
# Central differences at eps=1e-5 carry roundoff of this order; discrepancies below
# it are indistinguishable from an exact match.
ABS_NOISE_FLOOR = 1e-10
KINK_RADIUS = 10.0

Inputs = Tensor | np.ndarray | Mapping[str, Tensor | np.ndarray]


@dataclass
class ParamCheck:
    name: str
    max_abs_error: float
    max_rel_error: float
    checked: int
    skipped: int
    passed: bool
    floored: int = 0


@dataclass
class GradReport:
    tol: float
    eps: float
    params: list[ParamCheck] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(p.passed for p in self.params)

    @property
    def max_rel_error(self) -> float:
        return max((p.max_rel_error for p in self.params), default=0.0)

    @property
    def skipped(self) -> int:
        return sum(p.skipped for p in self.params)

    @property
    def floored(self) -> int:
        """Coordinates over `tol` by relative error that the absolute noise floor forgave."""
        return sum(p.floored for p in self.params)


def finite_difference_gradient(
    f: Callable[[Tensor], Tensor | float], x: Tensor | np.ndarray, eps: float = 1e-5
) -> Tensor:
    """Central-difference estimate of df/dx, one coordinate at a time."""
    if eps <= 0:
        raise ValueError(f"eps must be positive, got {eps}")
    base = _array(x)
    grad = np.zeros_like(base)
    for idx in np.ndindex(base.shape):
        grad[idx] = _central_difference(lambda arr: _scalar(f(Tensor(arr))), base, idx, eps)
    return Tensor(grad)


def gradient_check(
    f: Callable,
    inputs: Inputs,
    tol: float = 1e-5,
    eps: float = 1e-5,
) -> GradReport:
    """Compare reverse-mode gradients of `f` against central finite differences.

    `inputs` is a single tensor (f is called with one Tensor) or a mapping of named
    tensors (f is called with a dict of Tensors). Coordinates whose +-10*eps
    perturbation flips a relu/max/hinge branch are reported as skipped.
    """
    named = _named_arrays(inputs)
    single = not isinstance(inputs, Mapping)

    def call(arrays: Mapping[str, np.ndarray], track: bool):
        tensors = {name: Tensor(arr, requires_grad=track) for name, arr in arrays.items()}
        arg = tensors["x"] if single else tensors
        return f(arg), tensors

    out, leaves = call(named, track=True)
    grads = out.backward()

    report = GradReport(tol=tol, eps=eps)
    for name, base in named.items():
        analytic = grads.get(leaves[name], np.zeros_like(base))

        def evaluate(arr: np.ndarray, name=name) -> float:
            value, _ = call({**named, name: arr}, track=False)
            return _scalar(value)

        def branches(arr: np.ndarray, name=name) -> list[np.ndarray]:
            with record_branches() as log:
                call({**named, name: arr}, track=False)
            return log

        with record_branches() as base_log:
            call(named, track=False)
        kinked = bool(base_log)

        max_abs = max_rel = 0.0
        checked = skipped = floored = 0
        for idx in np.ndindex(base.shape):
            if kinked and _crosses_kink(branches, base, idx, KINK_RADIUS * eps):
                skipped += 1
                continue
            numeric = _central_difference(evaluate, base, idx, eps)
            a = float(analytic[idx])
            abs_err = abs(a - numeric)
            rel_err = abs_err / max(abs(a), abs(numeric), REL_DENOMINATOR_FLOOR)
            if abs_err <= ABS_NOISE_FLOOR:
                floored += int(rel_err > tol)
                rel_err = 0.0
            max_abs = max(max_abs, abs_err)
            max_rel = max(max_rel, rel_err)
            checked += 1

        passed = max_rel <= tol
        if not passed:
            logger.warning("gradient check failed for %s: max rel error %.3e", name, max_rel)
        report.params.append(
            ParamCheck(
                name=name,
                max_abs_error=max_abs,
                max_rel_error=max_rel,
                checked=checked,
                skipped=skipped,
                passed=passed,
                floored=floored,
            )
        )
    return report


def _central_difference(
    evaluate: Callable[[np.ndarray], float], base: np.ndarray, idx: tuple, eps: float
) -> float:
    plus = base.copy()
    minus = base.copy()
    plus[idx] += eps
    minus[idx] -= eps
    return (evaluate(plus) - evaluate(minus)) / (2.0 * eps)


def _crosses_kink(
    branches: Callable[[np.ndarray], list[np.ndarray]],
    base: np.ndarray,
    idx: tuple,
    radius: float,
) -> bool:
    plus = base.copy()
    minus = base.copy()
    plus[idx] += radius
    minus[idx] -= radius
    upper, lower = branches(plus), branches(minus)
    if len(upper) != len(lower):
        return True
    return any(
        u.shape != v.shape or not np.array_equal(u, v) for u, v in zip(upper, lower)
    )


def _named_arrays(inputs: Inputs) -> dict[str, np.ndarray]:
    if isinstance(inputs, Mapping):
        return {name: _array(value) for name, value in inputs.items()}
    return {"x": _array(inputs)}


def _array(value: Tensor | np.ndarray) -> np.ndarray:
    data = value.data if isinstance(value, Tensor) else value
    return np.array(data, dtype=np.float64)


def _scalar(value: Tensor | float) -> float:
    return value.item() if isinstance(value, Tensor) else float(value)
