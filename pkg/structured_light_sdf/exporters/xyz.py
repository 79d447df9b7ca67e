"""Point dump of a depth map: one `x y z` line per valid pixel, camera frame, metres"""

from pathlib import Path

import numpy as np

from .base import BaseExporter


class XYZExporter(BaseExporter):
    """Export an (P, 3) point array as text"""

    def get_name(self) -> str:
        return "xyz"

    def export(self, obj: np.ndarray, output_path: Path, config: dict = None) -> Path:
        if output_path.is_dir():
            output_path = output_path / "points.xyz"
        output_path.parent.mkdir(parents=True, exist_ok=True)
        np.savetxt(output_path, np.asarray(obj, dtype=np.float64).reshape(-1, 3), fmt="%.6f")
        return output_path
