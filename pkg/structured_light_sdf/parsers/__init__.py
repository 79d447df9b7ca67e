"""Parsers for calibration, scene, image-set, float map and checkpoint files"""

from .base import BaseParser
from .calibration import CalibrationParser
from .capture_set import CaptureSetParser
from .checkpoint import Checkpoint, CheckpointParser, read_checkpoint
from .float_map import FloatMap, FloatMapParser, read_float_map
from .pattern_set import PatternSetParser
from .scene import SceneParser

__all__ = [
    "BaseParser", "CalibrationParser", "CaptureSetParser", "CheckpointParser", "FloatMapParser",
    "PatternSetParser", "SceneParser", "Checkpoint", "FloatMap", "read_checkpoint",
    "read_float_map", "get_parser",
]


def get_parser(kind: str) -> BaseParser:
    """Get the parser for a file kind"""
    kind_lower = kind.lower()

    if kind_lower == "calibration":
        return CalibrationParser()
    elif kind_lower == "scene":
        return SceneParser()
    elif kind_lower in ["pattern-set", "patterns"]:
        return PatternSetParser()
    elif kind_lower in ["capture-set", "captures"]:
        return CaptureSetParser()
    elif kind_lower in ["float-map", "depth"]:
        return FloatMapParser()
    elif kind_lower == "checkpoint":
        return CheckpointParser()
    else:
        raise ValueError(f"Unsupported file kind: {kind}")
