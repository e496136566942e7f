import json
from pathlib import Path

import numpy as np
import pytest
from click.testing import CliRunner

from tripletkd import __version__
from tripletkd.autodiff import Tensor, gradient_check
from tripletkd.cli.main import cli
from tripletkd.eval import gradient_suite

COMMON = """
seeds = [0, 1]
output_dir = "{out}"

[dataset]
kind = "synth_blobs"
classes = 3
per_class = 20
test_per_class = 10
dim = 4
spread = 0.1

[teacher]
preset = "mlp"
input_shape = [4]
num_classes = 3
hidden = [12]

[student]
preset = "mlp"
input_shape = [4]
num_classes = 3
hidden = [6]

[optimizer]
preset = "desk"
epochs = 2
batch_size = 16
"""

TEACHER = 'name = "teacher"\n' + COMMON
OURS = (
    'name = "ours"\nteacher_checkpoint = "{out}/teacher/seed-{{seed}}/checkpoint.dkpt"\n'
    + COMMON
    + '\n[loss]\npreset = "ours"\n'
    + '\n[sampling]\nnegative_by = "ground_truth"\n'
)


@pytest.fixture
def runner():
    return CliRunner()


def _config(tmp_path: Path, name: str, text: str, out: Path | None = None) -> Path:
    path = tmp_path / f"{name}.toml"
    path.write_text(text.format(out=(out or tmp_path / "runs").as_posix()))
    return path


def test_version(runner):
    result = runner.invoke(cli, ["--version"])
    assert result.exit_code == 0
    assert __version__ in result.output


def test_count_params_reports_ratio(runner, tmp_path):
    path = tmp_path / "cifar.toml"
    path.write_text('[teacher]\npreset = "cifar-teacher"\n[student]\npreset = "cifar-student"\n')
    result = runner.invoke(cli, ["--config", str(path), "count-params"])
    assert result.exit_code == 0, result.output
    assert "161,130" in result.output
    assert "1,256,106" in result.output
    assert "12.83%" in result.output


def test_validation_failure_writes_nothing(runner, tmp_path):
    out = tmp_path / "runs"
    path = _config(tmp_path, "ours", OURS, out)
    result = runner.invoke(cli, ["--config", str(path), "distill"])
    assert result.exit_code == 1
    assert "teacher_checkpoint" in result.output
    assert not out.exists()


def test_missing_config_flag(runner):
    result = runner.invoke(cli, ["train-teacher"])
    assert result.exit_code == 1
    assert "--config" in result.output


def test_train_distill_eval_compare(runner, tmp_path):
    out = tmp_path / "runs"
    teacher = _config(tmp_path, "teacher", TEACHER, out)
    ours = _config(tmp_path, "ours", OURS, out)

    result = runner.invoke(cli, ["--config", str(teacher), "train-teacher"])
    assert result.exit_code == 0, result.output
    for seed in (0, 1):
        run_dir = out / "teacher" / f"seed-{seed}"
        assert (run_dir / "checkpoint.dkpt").is_file()
        assert (run_dir / "model.json").is_file()
        assert len((run_dir / "metrics.jsonl").read_text().splitlines()) == 3

    result = runner.invoke(cli, ["--config", str(ours), "distill"])
    assert result.exit_code == 0, result.output
    assert "triplet_kd" in result.output

    result = runner.invoke(cli, ["--config", str(ours), "eval"])
    assert result.exit_code == 0, result.output
    assert "test accuracy" in result.output

    result = runner.invoke(cli, ["compare", str(teacher), str(ours)])
    assert result.exit_code == 0, result.output
    data = json.loads((out / "comparison.json").read_text())
    assert [row["method"] for row in data["rows"]] == ["ours", "teacher"]
    assert all(row["seeds"] == [0, 1] for row in data["rows"])


def test_parameter_count_shown_before_training(runner, tmp_path):
    out = tmp_path / "runs"
    teacher = _config(tmp_path, "teacher", TEACHER, out)
    ours = _config(tmp_path, "ours", OURS, out)
    result = runner.invoke(cli, ["--config", str(teacher), "--seed", "0", "train-teacher"])
    assert result.exit_code == 0, result.output
    # 4-12-3 mlp
    assert result.output.index("99 parameters") < result.output.index("epoch 1/2")
    result = runner.invoke(cli, ["--config", str(ours), "--seed", "0", "distill"])
    assert result.exit_code == 0, result.output
    assert result.output.index("51 parameters") < result.output.index("epoch 1/2")


def test_seed_override_runs_one_seed(runner, tmp_path):
    out = tmp_path / "runs"
    teacher = _config(tmp_path, "teacher", TEACHER, out)
    result = runner.invoke(cli, ["--config", str(teacher), "--seed", "5", "train-teacher"])
    assert result.exit_code == 0, result.output
    assert [p.name for p in (out / "teacher").iterdir()] == ["seed-5"]


def test_reruns_are_byte_identical(runner, tmp_path):
    teacher = _config(tmp_path, "teacher", TEACHER)
    for out in ("a", "b"):
        args = ["--config", str(teacher), "--out", str(tmp_path / out), "--seed", "0"]
        assert runner.invoke(cli, [*args, "train-teacher"]).exit_code == 0
    for name in ("metrics.jsonl", "checkpoint.dkpt", "model.json"):
        a = (tmp_path / "a" / "teacher" / "seed-0" / name).read_bytes()
        b = (tmp_path / "b" / "teacher" / "seed-0" / name).read_bytes()
        assert a == b


def test_compare_reports_absent_runs(runner, tmp_path):
    out = tmp_path / "runs"
    teacher = _config(tmp_path, "teacher", TEACHER, out)
    args = ["--config", str(teacher), "--seed", "0", "train-teacher"]
    assert runner.invoke(cli, args).exit_code == 0
    result = runner.invoke(cli, ["compare", str(teacher)])
    assert result.exit_code == 3
    assert "absent" in result.output
    assert json.loads((out / "comparison.json").read_text())["complete"] is False


def test_compare_empty_directory(runner, tmp_path):
    result = runner.invoke(cli, ["--out", str(tmp_path), "compare"])
    assert result.exit_code == 3
    assert "No completed runs" in result.output


def test_compare_needs_a_source(runner):
    result = runner.invoke(cli, ["compare"])
    assert result.exit_code == 2


def test_gradcheck_selected_checks(runner):
    result = runner.invoke(cli, ["gradcheck", "--seeds", "2", "--only", "loss:bkd"])
    assert result.exit_code == 0, result.output
    assert "All 1 checks passed" in result.output


def test_gradcheck_lists_checks(runner):
    result = runner.invoke(cli, ["gradcheck", "--list"])
    assert result.exit_code == 0
    assert "loss:triplet_kd" in result.output.split()


def test_gradcheck_unknown_check(runner):
    result = runner.invoke(cli, ["gradcheck", "--only", "loss:nope"])
    assert result.exit_code == 2
    assert "Unknown gradient check" in result.output


def test_gradcheck_failure_exits_3(runner, monkeypatch):
    def broken(seed, tol, eps):
        def f(x: Tensor) -> Tensor:
            # forward x^2, backward claims x
            return Tensor._node(x.data**2, (x,), lambda g: (g * x.data,), "half").sum()

        return gradient_check(f, np.array([0.5, 1.5]), tol=tol, eps=eps)

    monkeypatch.setattr(gradient_suite, "_CHECKS", dict(gradient_suite._CHECKS))
    gradient_suite.register_check("test:broken", broken)
    result = runner.invoke(cli, ["gradcheck", "--seeds", "1", "--only", "test:broken"])
    assert result.exit_code == 3
    assert "1 check(s) failed" in result.output
