from pathlib import Path

import pytest
from pydantic import ValidationError

from tripletkd.cli.context import CliState, load_config
from tripletkd.errors import ConfigError
from tripletkd.types.config import ExperimentConfig, LayerSpec, LossSpec, ModelConfig
from tripletkd.types.models import LayerKind, LossKind, PsiNorm, Reduction, ScheduleKind

DESK = """
name = "ours"
seeds = [0, 1]
output_dir = "{out}"
teacher_checkpoint = "{out}/teacher/seed-{{seed}}/checkpoint.dkpt"

[dataset]
kind = "synth_blobs"
classes = 3
dim = 4

[teacher]
preset = "mlp"
input_shape = [4]
num_classes = 3
hidden = [16, 16]

[student]
preset = "mlp"
input_shape = [4]
num_classes = 3
hidden = [8]

[optimizer]
preset = "desk"
epochs = 2

[loss]
preset = "ours+hkd"
table = "tiny-imagenet"
weights = {{ hkd = 4.0 }}

[sampling]
per_anchor = 2
"""


def _write(tmp_path: Path, text: str) -> Path:
    path = tmp_path / "experiment.toml"
    path.write_text(text.format(out=tmp_path / "runs"))
    return path


def test_parses_presets_and_overrides(tmp_path):
    config = ExperimentConfig.from_toml(_write(tmp_path, DESK))
    assert config.name == "ours"
    assert config.optimizer.epochs == 2
    assert config.optimizer.schedule is ScheduleKind.STEP_DECAY
    assert config.loss.weights == {LossKind.TRIPLET_KD: 2.0, LossKind.HKD: 4.0}
    assert config.loss.psi_norm is PsiNorm.SUM
    assert config.loss.triplet_reduction is Reduction.SUM
    assert config.sampling.per_anchor == 2
    assert config.teacher.to_spec().num_classes == 3
    expected = tmp_path / "runs" / "teacher" / "seed-1" / "checkpoint.dkpt"
    assert config.teacher_checkpoint_for(1) == expected


def test_unknown_keys_are_rejected(tmp_path):
    path = _write(tmp_path, DESK + "\n[extra]\nfoo = 1\n")
    with pytest.raises(ValidationError, match="extra"):
        ExperimentConfig.from_toml(path)


def test_negative_weight_rejected():
    with pytest.raises(ValidationError, match="must be >= 0"):
        LossSpec(weights={LossKind.BKD: -1.0})


def test_temperature_must_be_positive():
    with pytest.raises(ValidationError, match="temperature"):
        LossSpec(temperature=0.0)


def test_model_section_needs_preset_or_layers():
    with pytest.raises(ValidationError, match="exactly one"):
        ModelConfig()
    with pytest.raises(ValidationError, match="input_shape and num_classes"):
        ModelConfig(layers=[LayerSpec.linear(2)])


def test_explicit_layers():
    section = ModelConfig(
        layers=[{"kind": "linear", "units": 3}], input_shape=(5,), num_classes=3, bn_eps=1e-3
    )
    spec = section.to_spec()
    assert spec.layers[0].kind is LayerKind.LINEAR
    assert spec.bn_eps == 1e-3


def test_layer_fields_checked():
    with pytest.raises(ValidationError):
        LayerSpec(kind=LayerKind.CONV2D, channels=4)
    assert LayerSpec(kind="conv2d", channels=4, kernel=5).kernel == (5, 5)


def test_check_reports_every_problem(tmp_path):
    config = ExperimentConfig.model_validate(
        {
            "dataset": {"kind": "idx", "train_images": str(tmp_path / "missing.idx")},
            "student": {"preset": "mlp", "input_shape": [4], "num_classes": 3},
        }
    )
    fields = [field for field, _ in config.check("distill")]
    assert "dataset.train_images" in fields
    assert "dataset.train_labels" in fields
    assert "teacher" in fields
    assert "teacher_checkpoint" in fields


def test_check_flags_class_mismatch_and_bad_layers():
    config = ExperimentConfig.model_validate(
        {
            "dataset": {"classes": 4},
            "teacher": {
                "layers": [
                    {"kind": "conv2d", "channels": 2, "kernel": 3},
                    {"kind": "linear", "units": 3},
                ],
                "input_shape": [1, 4, 4],
                "num_classes": 3,
            },
        }
    )
    problems = dict(config.check("train-teacher"))
    assert "layer 1 (linear)" in problems["teacher.layers"]
    assert "teacher.num_classes" in problems


def test_count_params_needs_a_model():
    fields = [field for field, _ in ExperimentConfig().check("count-params")]
    assert fields == ["teacher"]


def test_load_config_applies_cli_overrides(tmp_path):
    path = _write(tmp_path, DESK)
    state = CliState(config_path=path, seed=7, out=tmp_path / "elsewhere")
    config = load_config(state)
    assert config.seeds == [7]
    assert config.output_dir == str(tmp_path / "elsewhere")


def test_load_config_errors(tmp_path):
    with pytest.raises(ConfigError, match="--config"):
        load_config(CliState())
    bad = tmp_path / "bad.toml"
    bad.write_text("name = ")
    with pytest.raises(ConfigError, match="not valid TOML"):
        load_config(CliState(config_path=bad))
    bad.write_text("seeds = []")
    with pytest.raises(ConfigError) as info:
        load_config(CliState(config_path=bad))
    assert info.value.problems[0][0] == "seeds"


@pytest.mark.parametrize(
    "path", sorted((Path(__file__).parent.parent / "configs").glob("*.toml")), ids=lambda p: p.name
)
def test_shipped_configs_parse(path):
    config = ExperimentConfig.from_toml(path)
    assert config.check("count-params") == []


def test_desk_students_share_the_teacher_test_split():
    configs = Path(__file__).parent.parent / "configs"
    teacher = ExperimentConfig.from_toml(configs / "desk-teacher.toml").dataset
    ours = ExperimentConfig.from_toml(configs / "desk-ours.toml")
    assert ours.loss.triplet_reduction is Reduction.MEAN
    for name in ("desk-student.toml", "desk-ours.toml"):
        student = ExperimentConfig.from_toml(configs / name).dataset
        assert student.per_class < teacher.per_class
        assert student.model_dump(exclude={"per_class"}) == teacher.model_dump(
            exclude={"per_class"}
        )
