"""Exporters for pattern sets, captures, float maps, checkpoints, tables and point dumps"""

from .base import BaseExporter
from .capture_set import CaptureSetExporter
from .checkpoint import CheckpointExporter, save_checkpoint
from .float_map import FloatMapExporter, write_float_map
from .pattern_set import PatternSetExporter
from .table import CSVExporter
from .xyz import XYZExporter

__all__ = [
    "BaseExporter", "CaptureSetExporter", "CheckpointExporter", "FloatMapExporter",
    "PatternSetExporter", "CSVExporter", "XYZExporter", "save_checkpoint", "write_float_map",
    "get_exporter",
]


def get_exporter(exporter_type: str) -> BaseExporter:
    """Get the appropriate exporter"""
    exporter_lower = exporter_type.lower()

    if exporter_lower in ["pattern-set", "patterns"]:
        return PatternSetExporter()
    elif exporter_lower in ["capture-set", "captures"]:
        return CaptureSetExporter()
    elif exporter_lower in ["float-map", "depth"]:
        return FloatMapExporter()
    elif exporter_lower == "checkpoint":
        return CheckpointExporter()
    elif exporter_lower == "csv":
        return CSVExporter()
    elif exporter_lower == "xyz":
        return XYZExporter()
    else:
        raise ValueError(f"Unsupported exporter type: {exporter_type}")
