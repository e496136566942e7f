from tripletkd.eval.compare import (
    Comparison,
    ComparisonRow,
    collect,
    compare_runs,
    write_comparison,
)
from tripletkd.eval.gradient_suite import CheckResult, check_names, register_check, run_suite

__all__ = [
    "CheckResult",
    "Comparison",
    "ComparisonRow",
    "check_names",
    "collect",
    "compare_runs",
    "register_check",
    "run_suite",
    "write_comparison",
]
