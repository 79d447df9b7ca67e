"""Float map exporter"""

from pathlib import Path
from typing import Union

import numpy as np

from .base import BaseExporter
from ..errors import ConfigError
from ..models import DepthMap
from ..parsers.float_map import FLOAT_MAP_MAGIC


def write_float_map(output_path: Path, data: np.ndarray, tag: str, t_near: float = 0.5,
                    t_far: float = 1.0) -> Path:
    """Text header line, then row-major little-endian float32 values"""
    if " " in tag or not tag:
        raise ConfigError(f"float map tag must be a non-empty word, got '{tag}'")
    data = np.asarray(data)
    height, width = data.shape
    output_path = Path(output_path)
    output_path.parent.mkdir(parents=True, exist_ok=True)
    header = f"{FLOAT_MAP_MAGIC} {width} {height} {float(t_near)!r} {float(t_far)!r} {tag}\n"
    with open(output_path, "wb") as f:
        f.write(header.encode("ascii"))
        f.write(np.ascontiguousarray(data, dtype="<f4").tobytes())
    return output_path


class FloatMapExporter(BaseExporter):
    """Export depth maps (or raw float images with a config tag) as float maps"""

    def get_name(self) -> str:
        return "float-map"

    def export(self, obj: Union[DepthMap, np.ndarray], output_path: Path, config: dict = None) -> Path:
        config = config or {}
        if output_path.is_dir():
            output_path = output_path / config.get("filename", "depth.sldm")
        if isinstance(obj, DepthMap):
            data = np.where(obj.valid, obj.depth, np.nan)
            return write_float_map(output_path, data, obj.source.value, obj.t_near, obj.t_far)
        return write_float_map(output_path, obj, config.get("tag", "map"),
                               config.get("t_near", 0.5), config.get("t_far", 1.0))
