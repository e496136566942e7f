from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path

from tripletkd.cli.display import Display
from tripletkd.data.dataset import Dataset, standardize
from tripletkd.data.loaders import load_cifar10_binary, load_idx
from tripletkd.data.synthetic import synth_split
from tripletkd.errors import ConfigError
from tripletkd.nn.checkpoint import file_digest, load_checkpoint, save_checkpoint
from tripletkd.nn.model import Model, count_params
from tripletkd.state.metrics_store import MetricsStore
from tripletkd.train.trainer import (
    TrainResult,
    distill_student,
    evaluate_accuracy,
    train_teacher,
)
from tripletkd.types.config import ExperimentConfig, ModelSpec
from tripletkd.types.models import EpochMetrics, Role, RunRecord

logger = logging.getLogger(__name__)


@dataclass
class EvalResult:
    seed: int
    role: Role
    accuracy: float
    checkpoint: Path


class Experiment:
    """Runs one lifecycle stage of an experiment config, once per seed."""

    def __init__(self, config: ExperimentConfig, display: Display | None = None) -> None:
        self.config = config
        self.display = display or Display()
        self.store = MetricsStore(Path(config.output_dir))

    def validate(self, command: str) -> None:
        """Raise ConfigError listing every problem; never touches the output directory."""
        problems = self.config.check(command)
        if command == "eval":
            for seed in self.config.seeds:
                for path in (self._checkpoint(seed), self.store.model_path(self.config.name, seed)):
                    if not path.is_file():
                        problems.append(("name", f"file not found: {path}"))
        if problems:
            raise ConfigError(problems)

    def train_teacher(self) -> list[RunRecord]:
        self.validate("train-teacher")
        spec = self.config.teacher.to_spec()
        train, test = load_datasets(self.config)
        records = []
        for seed in self.config.seeds:
            model = Model.build(spec, seed=seed)
            self.display.show_run_start(
                self.config.name, Role.TEACHER, seed, model.count_params()
            )
            record, on_epoch = self._start_record(Role.TEACHER, seed, model)
            result = train_teacher(
                model, train, test, self.config.optimizer, seed, on_epoch=on_epoch
            )
            self._finish(record, spec, result)
            records.append(record)
        return records

    def distill(self) -> list[RunRecord]:
        self.validate("distill")
        teacher_spec = self.config.teacher.to_spec()
        student_spec = self.config.student.to_spec()
        train, test = load_datasets(self.config)
        records = []
        for seed in self.config.seeds:
            student = Model.build(student_spec, seed=seed)
            self.display.show_run_start(
                self.config.name, Role.STUDENT, seed, student.count_params()
            )
            path = self.config.teacher_checkpoint_for(seed)
            digest = file_digest(path)
            teacher = Model.build(teacher_spec, seed=seed)
            teacher.store.load_state(load_checkpoint(path))
            logger.info("loaded teacher checkpoint %s", path)

            record, on_epoch = self._start_record(Role.STUDENT, seed, student)
            result = distill_student(
                student,
                teacher,
                train,
                test,
                self.config.loss,
                self.config.sampling,
                self.config.optimizer,
                seed,
                on_epoch=on_epoch,
            )
            if file_digest(path) != digest:
                raise RuntimeError(f"teacher checkpoint {path} changed during distillation")
            self._finish(record, student_spec, result)
            records.append(record)
        return records

    def evaluate(self) -> list[EvalResult]:
        """Test accuracy of the stored checkpoint of every seed of this run."""
        self.validate("eval")
        _, test = load_datasets(self.config)
        results = []
        for seed in self.config.seeds:
            spec_path = self.store.model_path(self.config.name, seed)
            spec = ModelSpec.model_validate_json(spec_path.read_text())
            model = Model.build(spec, seed=seed)
            model.store.load_state(load_checkpoint(self._checkpoint(seed)))
            record = self.store.load(self.config.name, seed)
            role = record.role if record is not None else Role.STUDENT
            results.append(
                EvalResult(seed, role, evaluate_accuracy(model, test), self._checkpoint(seed))
            )
        return results

    def count_params(self) -> dict[Role, int]:
        self.validate("count-params")
        counts = {}
        for role in Role:
            section = getattr(self.config, role.value)
            if section is not None:
                counts[role] = count_params(section.to_spec())
        return counts

    def _checkpoint(self, seed: int) -> Path:
        return self.store.checkpoint_path(self.config.name, seed)

    def _start_record(self, role: Role, seed: int, model: Model):
        record = RunRecord(
            run=self.config.name,
            role=role,
            method=self.config.name,
            seed=seed,
            param_count=model.count_params(),
        )
        self.store.start(record)

        def on_epoch(metrics: EpochMetrics) -> None:
            record.history.append(metrics)
            self.store.append(record, metrics)
            self.display.show_epoch(metrics, self.config.optimizer.epochs)

        return record, on_epoch

    def _finish(self, record: RunRecord, spec: ModelSpec, result: TrainResult) -> None:
        save_checkpoint(self._checkpoint(record.seed), result.model.store.state())
        model_path = self.store.model_path(record.run, record.seed)
        model_path.write_text(spec.model_dump_json(indent=2))
        self.display.show_run_done(record, result.diagnostics)


def load_datasets(config: ExperimentConfig) -> tuple[Dataset, Dataset]:
    """Train and test splits for the dataset section, standardized on request."""
    ds = config.dataset
    if ds.kind == "synth_blobs":
        train, test = synth_split(
            ds.classes, ds.per_class, ds.test_per_class, ds.dim, ds.spread, ds.synth_seed
        )
    elif ds.kind == "cifar10":
        train = load_cifar10_binary(*map(Path, ds.train_paths), split="train")
        test = load_cifar10_binary(*map(Path, ds.test_paths), split="test")
    else:
        train = load_idx(Path(ds.train_images), Path(ds.train_labels), split="train")
        test = load_idx(
            Path(ds.test_images),
            Path(ds.test_labels),
            num_classes=train.num_classes,
            split="test",
        )
    if ds.standardize:
        train, test = standardize(train, test)
    return train, test
