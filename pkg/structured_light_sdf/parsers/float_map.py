"""Parser for the float map container (depth, a/b, error and column maps)"""

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .base import BaseParser
from ..errors import ConfigError
from ..models import DepthMap, DepthSource

FLOAT_MAP_MAGIC = "SLDM1"


@dataclass
class FloatMap:
    """A float32 image with its bounds and tag; NaN marks invalid pixels"""
    data: np.ndarray
    tag: str
    t_near: float = 0.5
    t_far: float = 1.0

    def to_depth_map(self) -> DepthMap:
        try:
            source = DepthSource(self.tag)
        except ValueError as e:
            raise ConfigError(f"float map tagged '{self.tag}' is not a depth map") from e
        data = self.data.astype(np.float64)
        return DepthMap(data, np.isfinite(data), source, self.t_near, self.t_far)


def read_float_map(file_path: Path) -> FloatMap:
    file_path = Path(file_path)
    if not file_path.is_file():
        raise ConfigError(f"file not found: {file_path}")
    raw = file_path.read_bytes()
    newline = raw.find(b"\n")
    if newline < 0:
        raise ConfigError(f"{file_path}: missing float map header")
    fields = raw[:newline].decode("ascii", errors="replace").split(" ")
    if len(fields) != 6 or fields[0] != FLOAT_MAP_MAGIC:
        raise ConfigError(f"{file_path}: not a {FLOAT_MAP_MAGIC} float map")
    try:
        width, height = int(fields[1]), int(fields[2])
        t_near, t_far = float(fields[3]), float(fields[4])
    except ValueError as e:
        raise ConfigError(f"{file_path}: malformed header") from e
    payload = raw[newline + 1:]
    if len(payload) != 4 * width * height:
        raise ConfigError(
            f"{file_path}: expected {4 * width * height} data bytes, found {len(payload)}"
        )
    data = np.frombuffer(payload, dtype="<f4").reshape(height, width).copy()
    return FloatMap(data, fields[5], t_near, t_far)


class FloatMapParser(BaseParser):
    """Parser for `SLDM1` float maps"""

    @property
    def kind(self) -> str:
        return "float-map"

    def parse(self, file_path: Path) -> FloatMap:
        return read_float_map(file_path)

    def validate(self, file_path: Path) -> bool:
        try:
            with open(file_path, "rb") as f:
                return f.read(len(FLOAT_MAP_MAGIC)) == FLOAT_MAP_MAGIC.encode("ascii")
        except OSError:
            return False
