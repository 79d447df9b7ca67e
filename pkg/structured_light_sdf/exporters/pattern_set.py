"""Pattern set exporter: one 16-bit graymap per pattern plus manifest.yaml

Grids that 16 bits cannot hold exactly (phase fringes, blurred patterns) also get a
float32 `.sldm` copy, which the parser prefers over the graymap.
"""

import logging
from pathlib import Path

import yaml

from .base import BaseExporter
from .float_map import write_float_map
from ..models import PatternSet
from ..parsers.images import fits_gray16, write_gray16

logger = logging.getLogger(__name__)


def _plain(value):
    """Numpy scalars to built-ins so the manifest stays plain YAML"""
    if hasattr(value, "item"):
        return value.item()
    return value


class PatternSetExporter(BaseExporter):
    """Export a PatternSet into a directory"""

    def get_name(self) -> str:
        return "pattern-set"

    def export(self, obj: PatternSet, output_path: Path, config: dict = None) -> Path:
        config = config or {}
        prefix = config.get("prefix", "pattern")
        output_path.mkdir(parents=True, exist_ok=True)
        entries = []
        for i, pattern in enumerate(obj):
            name = f"{prefix}_{i:03d}.pgm"
            write_gray16(output_path / name, pattern.grid)
            entry = {
                "file": name,
                "kind": pattern.kind.value,
                "meta": {k: _plain(v) for k, v in pattern.meta.items()},
            }
            if not fits_gray16(pattern.grid):
                exact = f"{prefix}_{i:03d}.sldm"
                write_float_map(output_path / exact, pattern.grid, "pattern", 0.0, 1.0)
                entry["exact"] = exact
            entries.append(entry)
        height, width = obj.resolution
        manifest = {
            "count": len(obj),
            "width": int(width),
            "height": int(height),
            "rng_seed": obj.rng_seed,
            "patterns": entries,
        }
        with open(output_path / "manifest.yaml", "w", encoding="utf-8") as f:
            yaml.safe_dump(manifest, f, default_flow_style=False, sort_keys=False)
        logger.info("wrote %d patterns to %s", len(obj), output_path)
        return output_path
