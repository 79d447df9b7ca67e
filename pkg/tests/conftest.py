"""Shared fixtures: a small desk-like rig, the reference scene and tiny networks"""

import copy

import numpy as np
import pytest
import yaml

from structured_light_sdf.config import DESK_CALIBRATION, REFERENCE_SCENE, load_rig
from structured_light_sdf.models import TrainConfig
from structured_light_sdf.network import EncodingConfig, SceneBox, SdfNetwork, init_geometric
from structured_light_sdf.parsers.scene import scene_from_dict
from structured_light_sdf.patterns import gen_random_multiscale
from structured_light_sdf.scene import render_captures
from structured_light_sdf.training import create_state

# desk geometry with every focal length and image size divided by 8
SMALL_CALIBRATION = {
    "camera": {
        **DESK_CALIBRATION["camera"],
        "fx": 75.0, "fy": 75.0, "cx": 19.5, "cy": 15.5, "width": 40, "height": 32,
    },
    "projector": {
        **DESK_CALIBRATION["projector"],
        "fx": 75.0, "fy": 75.0, "cx": 19.5, "cy": 12.0, "width": 40, "height": 25,
    },
}


@pytest.fixture
def desk_rig():
    return load_rig(copy.deepcopy(DESK_CALIBRATION))


@pytest.fixture
def small_rig():
    return load_rig(copy.deepcopy(SMALL_CALIBRATION))


@pytest.fixture
def reference_scene():
    return scene_from_dict(copy.deepcopy(REFERENCE_SCENE))


@pytest.fixture
def plane_scene():
    return scene_from_dict({
        "noise_sigma": 0.0,
        "primitives": [{"shape": "plane", "center": [0.0, 0.0, 0.8], "normal": [0.0, 0.0, -1.0]}],
    })


@pytest.fixture
def box():
    return SceneBox((0.0, 0.0, 0.75), 0.3)


def make_tiny_net(seed: int = 0, skip_layer=None) -> SdfNetwork:
    net = SdfNetwork(hidden_layers=2, hidden_width=16, skip_layer=skip_layer,
                     encoding=EncodingConfig(num_frequencies=2))
    return init_geometric(net, radius=0.5, seed=seed)


@pytest.fixture
def tiny_net():
    return make_tiny_net()


@pytest.fixture
def tiny_train_config():
    return TrainConfig(batch_size=32, iterations=3, phase1_iterations=1, k_coarse=8, k_fine=4,
                       chunk_size=16, b_floor=0.02, seed=0)


@pytest.fixture
def small_patterns():
    return gen_random_multiscale((25, 40), scales=(8, 4, 2), per_scale=1, seed=0)


@pytest.fixture
def small_captures(small_rig, reference_scene, small_patterns):
    return render_captures(reference_scene, small_rig.camera, small_rig.projector, small_patterns,
                           noise_sigma=0.0, seed=0)


@pytest.fixture
def tiny_state(small_rig, box, small_patterns, small_captures, tiny_train_config):
    captures, _ = small_captures
    return create_state(make_tiny_net(), box, small_rig.camera, small_rig.projector,
                        small_patterns, captures, tiny_train_config)


@pytest.fixture
def tiny_config_data():
    """Experiment config small enough for end-to-end CLI runs"""
    return {
        "seed": 0,
        "bounds": [0.5, 1.0],
        "calibration": copy.deepcopy(SMALL_CALIBRATION),
        "patterns": {"scales": [8, 4, 2], "per_scale": 2, "blur_sigma": 0.5},
        "ground_truth": {"gray_bits": 6, "wavelength": 8.0, "steps": 4, "noise_sigma": 0.0},
        "network": {"hidden_layers": 2, "hidden_width": 32, "skip_layer": 1, "num_frequencies": 2},
        "train": {"batch_size": 64, "iterations": 4, "phase1_iterations": 2, "k_coarse": 8,
                  "k_fine": 4, "chunk_size": 32},
        "extract": {"samples_per_ray": 32},
        "sweep": {"min_patterns": 2, "max_patterns": 3, "gray_bits": 6},
        "incremental": {"initial_patterns": 2, "max_patterns": 3, "interval": 2},
    }


@pytest.fixture
def tiny_config_file(tmp_path, tiny_config_data):
    path = tmp_path / "tiny.yaml"
    with open(path, "w", encoding="utf-8") as f:
        yaml.safe_dump(tiny_config_data, f, sort_keys=False)
    return path


def numerical_gradient(fn, x0: np.ndarray, h: float = 1e-6) -> np.ndarray:
    """Central differences of a scalar function of an array"""
    x0 = np.asarray(x0, dtype=np.float64)
    grad = np.zeros_like(x0)
    for idx in np.ndindex(x0.shape):
        plus, minus = x0.copy(), x0.copy()
        plus[idx] += h
        minus[idx] -= h
        grad[idx] = (float(fn(plus)) - float(fn(minus))) / (2 * h)
    return grad
