from tripletkd.autodiff.gradcheck import (
    GradReport,
    ParamCheck,
    finite_difference_gradient,
    gradient_check,
)
from tripletkd.autodiff.tensor import (
    GraphNode,
    Tensor,
    as_tensor,
    no_grad,
    record_branches,
    trace,
    where,
)

__all__ = [
    "GradReport",
    "GraphNode",
    "ParamCheck",
    "Tensor",
    "as_tensor",
    "finite_difference_gradient",
    "gradient_check",
    "no_grad",
    "record_branches",
    "trace",
    "where",
]
