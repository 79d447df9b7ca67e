"""Tests for configuration loading, presets and output directories"""

from pathlib import Path

import pytest
import yaml

from structured_light_sdf.config import (
    DEFAULTS,
    OUTPUT_ENV,
    RESOLVED_NAME,
    ExperimentConfig,
    deep_merge,
    load_config,
    resolve_output_dir,
    write_resolved,
)
from structured_light_sdf.errors import ConfigError
from structured_light_sdf.models import WeightMode

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def test_deep_merge_keeps_untouched_keys():
    merged = deep_merge({"a": {"x": 1, "y": 2}, "b": [1, 2]}, {"a": {"y": 3}, "b": [4]})
    assert merged == {"a": {"x": 1, "y": 3}, "b": [4]}


class TestLoadConfig:
    def test_defaults(self):
        data = load_config()
        assert data["preset"] == "desk"
        cfg = ExperimentConfig.from_dict(data)
        assert cfg.bounds == (0.5, 1.0)
        assert cfg.rig.camera.intrinsics.resolution == (256, 320)
        assert cfg.train.iterations == 1000
        assert cfg.train.weight_mode is WeightMode.EQ3
        assert cfg.new_network().layer_shapes()[0] == (39, 64)

    def test_defaults_are_not_mutated(self):
        data = load_config(overrides={"train": {"iterations": 5}})
        data["patterns"]["scales"].append(1)
        assert DEFAULTS["train"]["iterations"] == 1000
        assert DEFAULTS["patterns"]["scales"] == [20, 10, 5]

    def test_full_preset(self):
        cfg = ExperimentConfig.from_dict(load_config(preset="full"))
        assert cfg.rig.camera.intrinsics.resolution == (1024, 1280)
        assert cfg.rig.projector.intrinsics.resolution == (800, 1280)
        # extrinsics come from the desk rig
        assert cfg.rig.baseline == pytest.approx(0.2)
        assert cfg.train.batch_size == 2048
        assert cfg.new_network().hidden_width == 256

    def test_precedence(self, tmp_path):
        path = tmp_path / "exp.yaml"
        path.write_text("train:\n  iterations: 40\n  batch_size: 128\n", encoding="utf-8")
        data = load_config(path, preset="full", overrides={"train": {"iterations": 7}})
        assert data["train"]["iterations"] == 7
        assert data["train"]["batch_size"] == 128
        assert data["train"]["k_fine"] == 32
        assert data["train"]["learning_rate"] == DEFAULTS["train"]["learning_rate"]

    def test_paths_resolve_against_the_config_file(self):
        data = load_config(CONFIGS / "desk.yaml")
        assert data["scene"] == str((CONFIGS / "scenes" / "reference.yaml").resolve())
        assert data["calibration"] == str((CONFIGS / "calibration" / "desk.yaml").resolve())
        cfg = ExperimentConfig.from_dict(data)
        assert cfg.train.checkpoint_every == 250
        assert cfg.scene.contrast == pytest.approx(0.8)

    def test_unknown_preset(self):
        with pytest.raises(ConfigError):
            load_config(preset="lab")

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config(tmp_path / "absent.yaml")

    @pytest.mark.parametrize("bounds", [[1.0, 0.5], [0.0, 1.0], [0.5, 0.5]])
    def test_bad_bounds(self, bounds):
        with pytest.raises(ConfigError):
            ExperimentConfig.from_dict(load_config(overrides={"bounds": bounds}))

    def test_bad_train_value(self):
        with pytest.raises(ConfigError):
            ExperimentConfig.from_dict(load_config(overrides={"train": {"batch_size": "many"}}))
        with pytest.raises(ConfigError):
            ExperimentConfig.from_dict(load_config(overrides={"train": {"weight_mode": "volume"}}))

    def test_tiny_test_config(self, tiny_config_file):
        cfg = ExperimentConfig.from_dict(load_config(tiny_config_file))
        assert cfg.rig.camera.intrinsics.resolution == (32, 40)
        assert cfg.train.iterations == 4


class TestOutputDir:
    def test_command_line_wins(self, tmp_path, monkeypatch):
        monkeypatch.setenv(OUTPUT_ENV, str(tmp_path / "env"))
        data = {"output_dir": str(tmp_path / "cfg")}
        assert resolve_output_dir(tmp_path / "cli", data, "train") == tmp_path / "cli"
        assert resolve_output_dir(None, data, "train") == tmp_path / "cfg"

    def test_environment_then_default(self, tmp_path, monkeypatch):
        monkeypatch.setenv(OUTPUT_ENV, str(tmp_path / "env"))
        assert resolve_output_dir(None, {}, "sweep") == tmp_path / "env" / "sweep"
        monkeypatch.delenv(OUTPUT_ENV)
        assert resolve_output_dir(None, {"output_dir": None}, "sweep") == Path("runs") / "sweep"

    def test_resolved_snapshot(self, tmp_path):
        data = load_config(overrides={"seed": 3})
        path = write_resolved(data, tmp_path / "out")
        assert path.name == RESOLVED_NAME
        with open(path, encoding="utf-8") as f:
            snapshot = yaml.safe_load(f)
        assert snapshot["seed"] == 3
        assert ExperimentConfig.from_dict(snapshot).seed == 3
