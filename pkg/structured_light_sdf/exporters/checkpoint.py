"""Checkpoint exporter (layout documented in parsers.checkpoint)"""

import logging
import struct
from pathlib import Path
from typing import Optional

import numpy as np
import yaml

from .base import BaseExporter
from ..network import SceneBox, SdfNetwork
from ..parsers.checkpoint import CHECKPOINT_MAGIC, Checkpoint
from ..training.optimizer import Adam

logger = logging.getLogger(__name__)


def save_checkpoint(output_path: Path, net: SdfNetwork, box: SceneBox,
                    optimizer: Optional[Adam] = None, iteration: int = 0) -> Path:
    header = {
        "format_version": 1,
        "architecture": net.architecture(),
        "scene_box": {"center": [float(c) for c in box.center], "half_extent": float(box.half_extent)},
        "iteration": int(iteration),
        "parameters": [{"name": name, "shape": list(value.shape)} for name, value in net.params.items()],
        "optimizer": None,
    }
    blocks = [net.get_flat()]
    if optimizer is not None:
        header["optimizer"] = {
            "step_count": optimizer.step_count,
            "learning_rate": optimizer.learning_rate,
            "beta1": optimizer.beta1,
            "beta2": optimizer.beta2,
            "eps": optimizer.eps,
        }
        for moments in (optimizer.m, optimizer.v):
            blocks.append(np.concatenate([
                np.asarray(moments.get(name, np.zeros_like(value))).ravel()
                for name, value in net.params.items()
            ]))
    encoded = yaml.safe_dump(header, sort_keys=False).encode("utf-8")
    output_path = Path(output_path)
    output_path.parent.mkdir(parents=True, exist_ok=True)
    with open(output_path, "wb") as f:
        f.write(CHECKPOINT_MAGIC)
        f.write(struct.pack("<I", len(encoded)))
        f.write(encoded)
        for block in blocks:
            f.write(np.ascontiguousarray(block, dtype="<f8").tobytes())
    logger.info("checkpoint written to %s (iteration %d)", output_path, iteration)
    return output_path


class CheckpointExporter(BaseExporter):
    """Export a Checkpoint"""

    def get_name(self) -> str:
        return "checkpoint"

    def export(self, obj: Checkpoint, output_path: Path, config: dict = None) -> Path:
        if output_path.is_dir():
            output_path = output_path / "model.slsdf"
        return save_checkpoint(output_path, obj.net, obj.box, obj.optimizer, obj.iteration)
