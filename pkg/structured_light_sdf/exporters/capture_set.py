"""Capture set exporter: 16-bit images, float a/b maps and manifest.yaml"""

import logging
from pathlib import Path

import yaml

from .base import BaseExporter
from .float_map import write_float_map
from ..models import CaptureSet
from ..parsers.images import write_gray16

logger = logging.getLogger(__name__)


class CaptureSetExporter(BaseExporter):
    """Export a CaptureSet into a directory"""

    def get_name(self) -> str:
        return "capture-set"

    def export(self, obj: CaptureSet, output_path: Path, config: dict = None) -> Path:
        config = config or {}
        prefix = config.get("prefix", "image")
        output_path.mkdir(parents=True, exist_ok=True)
        names = []
        for i, image in enumerate(obj.images):
            name = f"{prefix}_{i:03d}.pgm"
            write_gray16(output_path / name, image)
            names.append(name)
        write_float_map(output_path / "a_map.sldm", obj.a_map, "a-map")
        write_float_map(output_path / "b_map.sldm", obj.b_map, "b-map")
        manifest = {
            "count": len(obj),
            "noise_sigma": float(obj.noise_sigma),
            "images": names,
            "a_map": "a_map.sldm",
            "b_map": "b_map.sldm",
        }
        with open(output_path / "manifest.yaml", "w", encoding="utf-8") as f:
            yaml.safe_dump(manifest, f, default_flow_style=False, sort_keys=False)
        logger.info("wrote %d captures to %s", len(obj), output_path)
        return output_path
