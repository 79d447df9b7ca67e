"""Parser for pattern directories (16-bit graymaps plus manifest.yaml)"""

import logging
from pathlib import Path

from .base import BaseParser
from .float_map import read_float_map
from .images import read_gray16
from .yaml_io import read_yaml, require
from ..errors import ConfigError
from ..models import Pattern, PatternKind, PatternSet

logger = logging.getLogger(__name__)

MANIFEST = "manifest.yaml"


class PatternSetParser(BaseParser):
    """Parser for a directory written by the pattern-set exporter"""

    @property
    def kind(self) -> str:
        return "pattern-set"

    def parse(self, file_path: Path) -> PatternSet:
        directory = Path(file_path)
        manifest = read_yaml(directory / MANIFEST)
        patterns = []
        for entry in require(manifest, "patterns", str(directory / MANIFEST)):
            try:
                kind = PatternKind(entry["kind"])
            except (KeyError, ValueError) as e:
                raise ConfigError(f"{directory}: bad pattern kind in manifest") from e
            grid = read_gray16(directory / entry["file"])
            if entry.get("exact"):
                exact = read_float_map(directory / entry["exact"]).data
                if exact.shape != grid.shape:
                    raise ConfigError(
                        f"{directory / entry['exact']}: shape {exact.shape} does not match "
                        f"{entry['file']} {grid.shape}"
                    )
                grid = exact
            patterns.append(Pattern(grid, kind, dict(entry.get("meta") or {})))
        logger.debug("loaded %d patterns from %s", len(patterns), directory)
        return PatternSet(patterns=patterns, rng_seed=manifest.get("rng_seed"))

    def validate(self, file_path: Path) -> bool:
        return (Path(file_path) / MANIFEST).is_file()
