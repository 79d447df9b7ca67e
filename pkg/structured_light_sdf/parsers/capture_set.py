"""Parser for capture directories (images, a/b maps and manifest.yaml)"""

import logging
from pathlib import Path

import numpy as np

from .base import BaseParser
from .float_map import read_float_map
from .images import read_gray16
from .yaml_io import read_yaml, require
from ..models import CaptureSet

logger = logging.getLogger(__name__)

MANIFEST = "manifest.yaml"


class CaptureSetParser(BaseParser):
    """Parser for a directory written by the capture-set exporter"""

    @property
    def kind(self) -> str:
        return "capture-set"

    def parse(self, file_path: Path) -> CaptureSet:
        directory = Path(file_path)
        manifest = read_yaml(directory / MANIFEST)
        where = str(directory / MANIFEST)
        images = np.stack([read_gray16(directory / name) for name in require(manifest, "images", where)])
        a_map = read_float_map(directory / require(manifest, "a_map", where)).data.astype(np.float64)
        b_map = read_float_map(directory / require(manifest, "b_map", where)).data.astype(np.float64)
        logger.debug("loaded %d captures from %s", images.shape[0], directory)
        return CaptureSet(images=images, a_map=a_map, b_map=b_map,
                          noise_sigma=float(manifest.get("noise_sigma", 0.0)))

    def validate(self, file_path: Path) -> bool:
        return (Path(file_path) / MANIFEST).is_file()
