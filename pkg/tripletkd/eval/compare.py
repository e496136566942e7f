from __future__ import annotations

import json
import logging
from collections.abc import Iterable
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from tripletkd.state.metrics_store import MetricsStore
from tripletkd.types.config import METHODS
from tripletkd.types.models import Role, RunRecord

logger = logging.getLogger(__name__)

TEACHER_METHOD = "teacher"


@dataclass
class ComparisonRow:
    method: str
    role: Role
    seeds: list[int]
    accuracies: list[float]
    param_count: int

    @property
    def mean(self) -> float:
        return float(np.mean(self.accuracies))

    @property
    def std(self) -> float:
        """Sample standard deviation across seeds; 0 for a single seed."""
        if len(self.accuracies) < 2:
            return 0.0
        return float(np.std(self.accuracies, ddof=1))


@dataclass
class Comparison:
    rows: list[ComparisonRow] = field(default_factory=list)
    absent: list[str] = field(default_factory=list)

    @property
    def complete(self) -> bool:
        return not self.absent

    def to_dict(self) -> dict:
        return {
            "rows": [
                {
                    "method": r.method,
                    "role": r.role.value,
                    "seeds": r.seeds,
                    "accuracies": r.accuracies,
                    "mean": r.mean,
                    "std": r.std,
                    "param_count": r.param_count,
                }
                for r in self.rows
            ],
            "absent": self.absent,
            "complete": self.complete,
        }


def compare_runs(records: Iterable[RunRecord], absent: Iterable[str] = ()) -> Comparison:
    """Group final test accuracies by method.

    Rows follow the comparison-table order: plain student, the distillation methods
    in their canonical order, other methods alphabetically, teacher last. Runs
    without a finished epoch are reported as absent.
    """
    grouped: dict[str, list[RunRecord]] = {}
    missing = list(absent)
    for record in records:
        if record.final_accuracy is None:
            missing.append(f"{record.run}/seed-{record.seed} (no completed epoch)")
            continue
        grouped.setdefault(_method_label(record), []).append(record)

    rows = []
    for method, group in grouped.items():
        group.sort(key=lambda r: r.seed)
        rows.append(
            ComparisonRow(
                method=method,
                role=group[0].role,
                seeds=[r.seed for r in group],
                accuracies=[r.final_accuracy for r in group],
                param_count=group[0].param_count,
            )
        )
    rows.sort(key=lambda row: _row_key(row.method))
    return Comparison(rows=rows, absent=missing)


def collect(
    store: MetricsStore, expected: Iterable[tuple[str, int]] | None = None
) -> Comparison:
    """Compare every run in `store`, or exactly the (run, seed) pairs in `expected`."""
    if expected is None:
        return compare_runs(store.list_runs())
    records, absent = [], []
    for run, seed in expected:
        path = store.metrics_path(run, seed)
        try:
            record = store.load(run, seed)
        except (json.JSONDecodeError, KeyError, ValueError):
            logger.warning("Skipping corrupt metrics file: %s", path)
            record = None
        if record is None:
            absent.append(str(path))
        else:
            records.append(record)
    return compare_runs(records, absent)


def write_comparison(path: Path, comparison: Comparison) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(comparison.to_dict(), indent=2))


def _method_label(record: RunRecord) -> str:
    return TEACHER_METHOD if record.role is Role.TEACHER else record.method


def _row_key(method: str) -> tuple[int, int, str]:
    if method == TEACHER_METHOD:
        return (2, 0, method)
    order = list(METHODS)
    if method in order:
        return (0, order.index(method), method)
    return (1, 0, method)
