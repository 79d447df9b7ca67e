"""Parser for network checkpoints.

Layout: magic b"SLSDFNET", uint32 little-endian header length, YAML header,
then float64 little-endian parameters in layer order (log s last), then, when
the header has an optimizer block, the first and second moments in the same order.
"""

import logging
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np
import yaml

from .base import BaseParser
from ..errors import ConfigError
from ..network import SceneBox, SdfNetwork
from ..training.optimizer import Adam

logger = logging.getLogger(__name__)

CHECKPOINT_MAGIC = b"SLSDFNET"


@dataclass
class Checkpoint:
    net: SdfNetwork
    box: SceneBox
    iteration: int = 0
    optimizer: Optional[Adam] = None


def read_checkpoint(file_path: Path) -> Checkpoint:
    file_path = Path(file_path)
    if not file_path.is_file():
        raise ConfigError(f"checkpoint not found: {file_path}")
    raw = file_path.read_bytes()
    if raw[:len(CHECKPOINT_MAGIC)] != CHECKPOINT_MAGIC:
        raise ConfigError(f"{file_path}: not a checkpoint")
    offset = len(CHECKPOINT_MAGIC)
    (header_len,) = struct.unpack_from("<I", raw, offset)
    offset += 4
    header = yaml.safe_load(raw[offset:offset + header_len].decode("utf-8"))
    offset += header_len

    net = SdfNetwork.from_architecture(header["architecture"])
    box = SceneBox(tuple(header["scene_box"]["center"]), float(header["scene_box"]["half_extent"]))
    count = net.parameter_count()
    if (len(raw) - offset) % 8:
        raise ConfigError(f"{file_path}: truncated parameter block")
    body = np.frombuffer(raw, dtype="<f8", offset=offset)
    has_optimizer = header.get("optimizer") is not None
    expected = count * (3 if has_optimizer else 1)
    if body.size != expected:
        raise ConfigError(f"{file_path}: expected {expected} values, found {body.size}")
    net.set_flat(body[:count])

    optimizer = None
    if has_optimizer:
        settings = header["optimizer"]
        optimizer = Adam(float(settings["learning_rate"]), float(settings["beta1"]),
                         float(settings["beta2"]), float(settings["eps"]))
        moments = {}
        for key, flat in (("m", body[count:2 * count]), ("v", body[2 * count:])):
            shadow = SdfNetwork.from_architecture(header["architecture"])
            shadow.set_flat(flat)
            moments[key] = shadow.params
        optimizer.load_state_dict({"step_count": settings["step_count"], **moments})
    logger.debug("loaded checkpoint %s at iteration %s", file_path, header.get("iteration"))
    return Checkpoint(net, box, int(header.get("iteration", 0)), optimizer)


class CheckpointParser(BaseParser):
    """Parser for SLSDFNET checkpoints"""

    @property
    def kind(self) -> str:
        return "checkpoint"

    def parse(self, file_path: Path) -> Checkpoint:
        return read_checkpoint(file_path)

    def validate(self, file_path: Path) -> bool:
        try:
            with open(file_path, "rb") as f:
                return f.read(len(CHECKPOINT_MAGIC)) == CHECKPOINT_MAGIC
        except OSError:
            return False
