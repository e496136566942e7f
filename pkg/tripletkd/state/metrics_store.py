"""Per-run metrics files.

One JSON-lines file per (run, seed) at <base>/<run>/seed-<seed>/metrics.jsonl. The
first line is a header naming the format and the fixed column list; every further
line is one epoch record with exactly those columns. Inactive loss terms are null.
"""

from __future__ import annotations

import json
import logging
from pathlib import Path

from tripletkd.types.models import EpochMetrics, LossKind, Role, RunRecord

logger = logging.getLogger(__name__)

FORMAT = "tripletkd-metrics"
VERSION = 1
TERM_COLUMNS = [kind.value for kind in LossKind]
COLUMNS = ["epoch", "lr", "hard_loss", *TERM_COLUMNS, "total_loss", "test_accuracy"]


class MetricsStore:
    """Read and write run metrics under one output directory."""

    def __init__(self, base_dir: Path) -> None:
        self.base_dir = Path(base_dir)

    def run_dir(self, run: str, seed: int) -> Path:
        return self.base_dir / run / f"seed-{seed}"

    def metrics_path(self, run: str, seed: int) -> Path:
        return self.run_dir(run, seed) / "metrics.jsonl"

    def checkpoint_path(self, run: str, seed: int) -> Path:
        return self.run_dir(run, seed) / "checkpoint.dkpt"

    def model_path(self, run: str, seed: int) -> Path:
        return self.run_dir(run, seed) / "model.json"

    def start(self, record: RunRecord) -> Path:
        """Create (or truncate) the metrics file and write its header."""
        path = self.metrics_path(record.run, record.seed)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(_header(record)) + "\n")
        return path

    def append(self, record: RunRecord, metrics: EpochMetrics) -> None:
        path = self.metrics_path(record.run, record.seed)
        with open(path, "a") as f:
            f.write(json.dumps(_serialize_epoch(metrics)) + "\n")

    def save(self, record: RunRecord) -> Path:
        path = self.start(record)
        for metrics in record.history:
            self.append(record, metrics)
        return path

    def load(self, run: str, seed: int) -> RunRecord | None:
        path = self.metrics_path(run, seed)
        if not path.exists():
            return None
        return read_metrics(path)

    def list_runs(self) -> list[RunRecord]:
        runs = []
        for path in sorted(self.base_dir.glob("*/seed-*/metrics.jsonl")):
            try:
                runs.append(read_metrics(path))
            except (json.JSONDecodeError, KeyError, ValueError):
                logger.warning("Skipping corrupt metrics file: %s", path)
        return runs


def read_metrics(path: Path) -> RunRecord:
    lines = [line for line in Path(path).read_text().splitlines() if line.strip()]
    if not lines:
        raise ValueError(f"{path}: empty metrics file")
    header = json.loads(lines[0])
    if header.get("format") != FORMAT:
        raise ValueError(f"{path}: not a {FORMAT} file")
    return RunRecord(
        run=header["run"],
        role=Role(header["role"]),
        method=header["method"],
        seed=header["seed"],
        param_count=header["param_count"],
        history=[_deserialize_epoch(json.loads(line)) for line in lines[1:]],
    )


def _header(record: RunRecord) -> dict:
    return {
        "format": FORMAT,
        "version": VERSION,
        "run": record.run,
        "role": record.role.value,
        "method": record.method,
        "seed": record.seed,
        "param_count": record.param_count,
        "columns": COLUMNS,
    }


def _serialize_epoch(m: EpochMetrics) -> dict:
    terms = {kind.value: m.terms.get(kind) for kind in LossKind}
    return {
        "epoch": m.epoch,
        "lr": m.lr,
        "hard_loss": m.hard_loss,
        **terms,
        "total_loss": m.total_loss,
        "test_accuracy": m.test_accuracy,
    }


def _deserialize_epoch(data: dict) -> EpochMetrics:
    return EpochMetrics(
        epoch=data["epoch"],
        lr=data["lr"],
        hard_loss=data["hard_loss"],
        total_loss=data["total_loss"],
        test_accuracy=data["test_accuracy"],
        terms={
            LossKind(name): data[name] for name in TERM_COLUMNS if data.get(name) is not None
        },
    )
