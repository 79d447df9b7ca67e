"""Parser for analytic scene descriptions"""

from pathlib import Path
from typing import Any, Dict

import numpy as np

from .base import BaseParser
from .yaml_io import read_yaml, require
from ..errors import ConfigError
from ..scene import AnalyticScene, Primitive


def parse_primitive(data: Dict[str, Any], index: int) -> Primitive:
    where = f"primitive {index}"
    shape = require(data, "shape", where)
    params: Dict[str, Any] = {"center": data.get("center", [0.0, 0.0, 0.0])}
    if shape == "plane":
        params["normal"] = require(data, "normal", where)
    elif shape == "sphere":
        params["radius"] = float(require(data, "radius", where))
    elif shape == "box":
        params["half_extents"] = require(data, "half_extents", where)
        if "rotation" in data:
            params["rotation"] = np.asarray(data["rotation"], dtype=np.float64).reshape(3, 3)
    return Primitive(shape=shape, **params)


def scene_from_dict(data: Dict[str, Any]) -> AnalyticScene:
    primitives = require(data, "primitives", "scene")
    if not isinstance(primitives, list):
        raise ConfigError("scene: 'primitives' must be a list")
    return AnalyticScene(
        primitives=[parse_primitive(p, i) for i, p in enumerate(primitives)],
        ambient=float(data.get("ambient", 0.1)),
        contrast=float(data.get("contrast", 0.8)),
        noise_sigma=float(data.get("noise_sigma", 0.01)),
        photometric=data.get("photometric", "linear"),
        falloff_reference=float(data.get("falloff_reference", 0.75)),
    )


class SceneParser(BaseParser):
    """Parser for scene YAML: photometric constants plus a list of primitives"""

    @property
    def kind(self) -> str:
        return "scene"

    def parse(self, file_path: Path) -> AnalyticScene:
        return scene_from_dict(read_yaml(file_path))
