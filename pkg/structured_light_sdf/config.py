"""Experiment configuration: defaults, presets, YAML files and the resolved snapshot.

Precedence is defaults < preset < config file < command-line overrides. The
`scene` and `calibration` entries hold either an inline mapping or a path that
is resolved against the config file's directory.
"""

import copy
import logging
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Optional, Tuple

import yaml

from .errors import ConfigError
from .models import LossWeights, Rig, TrainConfig, WeightMode
from .network import EncodingConfig, SceneBox, SdfNetwork
from .parsers.calibration import CalibrationParser, parse_device
from .parsers.scene import SceneParser, scene_from_dict
from .parsers.yaml_io import read_yaml
from .scene import AnalyticScene

logger = logging.getLogger(__name__)

OUTPUT_ENV = "STRUCTURED_LIGHT_SDF_OUTPUT"
RESOLVED_NAME = "config.resolved.yaml"

_ROT = 0.9701425001453319  # 4 / sqrt(17)
_SIN = 0.24253562503633297  # 1 / sqrt(17)

DESK_CALIBRATION = {
    "camera": {
        "fx": 600.0, "fy": 600.0, "cx": 159.5, "cy": 127.5, "width": 320, "height": 256,
        "rotation": [1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0],
        "translation": [0.0, 0.0, 0.0],
    },
    # projector 0.2 m to the right of the camera, toed in towards (0, 0, 0.8)
    "projector": {
        "fx": 600.0, "fy": 600.0, "cx": 159.5, "cy": 99.5, "width": 320, "height": 200,
        "rotation": [_ROT, 0.0, _SIN, 0.0, 1.0, 0.0, -_SIN, 0.0, _ROT],
        "translation": [-0.19402850002906638, 0.0, 0.048507125007266595],
    },
}

REFERENCE_SCENE = {
    "ambient": 0.1,
    "contrast": 0.8,
    "noise_sigma": 0.01,
    "photometric": "linear",
    "primitives": [
        {"shape": "plane", "center": [0.0, 0.0, 0.9], "normal": [0.0, 0.0, -1.0]},
        {"shape": "sphere", "center": [0.0, 0.0, 0.75], "radius": 0.1},
    ],
}

DEFAULTS: Dict[str, Any] = {
    "seed": 0,
    "workers": 1,
    "output_dir": None,
    "bounds": [0.5, 1.0],
    "scene": REFERENCE_SCENE,
    "calibration": DESK_CALIBRATION,
    "patterns": {
        "kind": "random-binary",
        "scales": [20, 10, 5],
        "per_scale": 2,
        "order": "coarse-to-fine",
        "repeat_vertical": 1,
        "blur_sigma": 1.0,
    },
    "ground_truth": {
        "gray_bits": 7,
        "wavelength": 16.0,
        "steps": 4,
        "noise_sigma": None,
    },
    # 4x64 with the skip at layer 2 costs 12,352 multiply-adds per point, above the 10^4
    # desk target; deliberate. hidden_width 56 brings it to 9,464
    "network": {
        "hidden_layers": 4,
        "hidden_width": 64,
        "skip_layer": 2,
        "num_frequencies": 6,
        "include_input": True,
        "softplus_beta": 100.0,
        "init_radius": 0.5,
        "init_inv_s": 0.3,
    },
    "scene_box": {"center": [0.0, 0.0, 0.75], "half_extent": 0.3},
    "train": {
        "batch_size": 512,
        "iterations": 1000,
        "phase1_iterations": 250,
        "learning_rate": 5e-4,
        "beta1": 0.9,
        "beta2": 0.999,
        "eps": 1e-8,
        "k_coarse": 32,
        "k_fine": 16,
        "weight_mode": "eq3",
        "lambda_rc": 1.0,
        "lambda_sc": 1.0,
        "lambda_reg": 0.1,
        "b_floor": 0.02,
        "chunk_size": 128,
        "checkpoint_every": 0,
    },
    "extract": {"method": "root", "samples_per_ray": 128, "chunk_size": 4096},
    "sweep": {"min_patterns": 3, "max_patterns": 9, "source": "gray", "gray_bits": 9,
              "seeds": [0]},
    "incremental": {"initial_patterns": 3, "max_patterns": 9, "interval": 125},
    "ablation": {"variants": ["rc", "sc", "rc+reg", "sc+reg", "rc+sc", "full"]},
}

PRESETS: Dict[str, Dict[str, Any]] = {
    "desk": {},
    "full": {
        "calibration": {
            "camera": {"fx": 2400.0, "fy": 2400.0, "cx": 639.5, "cy": 511.5,
                       "width": 1280, "height": 1024},
            "projector": {"fx": 2400.0, "fy": 2400.0, "cx": 639.5, "cy": 399.5,
                          "width": 1280, "height": 800},
        },
        "patterns": {"scales": [80, 40, 20]},
        "network": {"hidden_layers": 8, "hidden_width": 256, "skip_layer": 4},
        "train": {"batch_size": 2048, "k_coarse": 32, "k_fine": 32, "iterations": 4000,
                  "phase1_iterations": 1000, "chunk_size": 256},
        "incremental": {"interval": 500},
        "sweep": {"gray_bits": 11},
    },
}


def deep_merge(base: Dict[str, Any], override: Dict[str, Any]) -> Dict[str, Any]:
    """Recursive dict merge; override wins, mappings merge, everything else replaces"""
    merged = copy.deepcopy(base)
    for key, value in (override or {}).items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = deep_merge(merged[key], value)
        else:
            merged[key] = copy.deepcopy(value)
    return merged


def load_config(config_path: Optional[Path] = None, preset: str = "desk",
                overrides: Optional[Dict[str, Any]] = None) -> Dict[str, Any]:
    """Merged configuration dictionary; file paths inside are made absolute"""
    if preset not in PRESETS:
        raise ConfigError(f"unknown preset '{preset}', expected one of {sorted(PRESETS)}")
    data = deep_merge(DEFAULTS, PRESETS[preset])
    base_dir = Path.cwd()
    if config_path is not None:
        config_path = Path(config_path)
        user = read_yaml(config_path)
        base_dir = config_path.resolve().parent
        for key in ("scene", "calibration"):
            # a path in the user file replaces the inline default entirely
            if isinstance(user.get(key), str):
                data[key] = user.pop(key)
        data = deep_merge(data, user)
    data = deep_merge(data, overrides or {})
    for key in ("scene", "calibration"):
        if isinstance(data[key], str):
            data[key] = str((base_dir / data[key]).resolve())
    data["preset"] = preset
    return data


def load_rig(entry) -> Rig:
    if isinstance(entry, dict):
        return Rig(parse_device(entry["camera"], "camera"), parse_device(entry["projector"], "projector"))
    return CalibrationParser().parse(Path(entry))


def load_scene(entry) -> AnalyticScene:
    if isinstance(entry, dict):
        return scene_from_dict(entry)
    return SceneParser().parse(Path(entry))


def build_network(section: Dict[str, Any]) -> SdfNetwork:
    network = SdfNetwork(
        hidden_layers=int(section["hidden_layers"]),
        hidden_width=int(section["hidden_width"]),
        skip_layer=None if section.get("skip_layer") is None else int(section["skip_layer"]),
        encoding=EncodingConfig(int(section["num_frequencies"]), bool(section["include_input"])),
        softplus_beta=float(section["softplus_beta"]),
    )
    logger.debug("network: %d layers, %d multiply-adds per point", network.num_layers,
                 network.multiply_adds())
    return network


def build_train_config(data: Dict[str, Any]) -> TrainConfig:
    section = data["train"]
    try:
        return TrainConfig(
            batch_size=int(section["batch_size"]),
            iterations=int(section["iterations"]),
            phase1_iterations=int(section["phase1_iterations"]),
            learning_rate=float(section["learning_rate"]),
            beta1=float(section["beta1"]),
            beta2=float(section["beta2"]),
            eps=float(section["eps"]),
            k_coarse=int(section["k_coarse"]),
            k_fine=int(section["k_fine"]),
            weight_mode=WeightMode(section["weight_mode"]),
            weights=LossWeights(lambda_sc=float(section["lambda_sc"]),
                                lambda_reg=float(section["lambda_reg"]),
                                lambda_rc=float(section.get("lambda_rc", 1.0))),
            b_floor=float(section["b_floor"]),
            chunk_size=int(section["chunk_size"]),
            workers=int(data.get("workers", 1)),
            seed=int(data.get("seed", 0)),
            checkpoint_every=int(section.get("checkpoint_every", 0)),
        )
    except (KeyError, TypeError, ValueError) as e:
        raise ConfigError(f"invalid train section: {e}") from e


@dataclass
class ExperimentConfig:
    """Everything one command needs, built from the merged dictionary"""
    raw: Dict[str, Any]
    scene: AnalyticScene
    rig: Rig
    train: TrainConfig
    box: SceneBox
    bounds: Tuple[float, float]
    seed: int = 0
    workers: int = 1
    output_dir: Optional[Path] = None
    patterns: Dict[str, Any] = field(default_factory=dict)

    def new_network(self) -> SdfNetwork:
        return build_network(self.raw["network"])

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "ExperimentConfig":
        bounds = tuple(float(b) for b in data["bounds"])
        if len(bounds) != 2 or not 0 < bounds[0] < bounds[1]:
            raise ConfigError(f"bounds must be 0 < t_near < t_far, got {data['bounds']}")
        box = data["scene_box"]
        return cls(
            raw=data,
            scene=load_scene(data["scene"]),
            rig=load_rig(data["calibration"]),
            train=build_train_config(data),
            box=SceneBox(tuple(float(c) for c in box["center"]), float(box["half_extent"])),
            bounds=bounds,
            seed=int(data.get("seed", 0)),
            workers=int(data.get("workers", 1)),
            output_dir=Path(data["output_dir"]) if data.get("output_dir") else None,
            patterns=dict(data["patterns"]),
        )


def resolve_output_dir(cli_out: Optional[Path], data: Dict[str, Any], command: str) -> Path:
    """--out, then the config's output_dir, then $STRUCTURED_LIGHT_SDF_OUTPUT/<command>, then ./runs/<command>"""
    if cli_out is not None:
        return Path(cli_out)
    if data.get("output_dir"):
        return Path(data["output_dir"])
    root = os.environ.get(OUTPUT_ENV)
    return Path(root or "runs") / command


def write_resolved(data: Dict[str, Any], output_dir: Path) -> Path:
    """Snapshot of the merged configuration next to a command's outputs"""
    output_dir.mkdir(parents=True, exist_ok=True)
    path = output_dir / RESOLVED_NAME
    with open(path, "w", encoding="utf-8") as f:
        yaml.safe_dump(data, f, default_flow_style=False, sort_keys=False)
    logger.debug("resolved configuration written to %s", path)
    return path
