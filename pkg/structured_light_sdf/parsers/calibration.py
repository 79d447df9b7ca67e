"""Parser for camera/projector calibration files"""

import logging
from pathlib import Path
from typing import Any, Dict

import numpy as np

from .base import BaseParser
from .yaml_io import read_yaml, require
from ..errors import ConfigError, DomainError
from ..geometry import nearest_rotation
from ..models import DeviceModel, Intrinsics, Rig

logger = logging.getLogger(__name__)

CALIBRATION_ORTHONORMAL_TOL = 1e-6


def parse_device(data: Dict[str, Any], where: str) -> DeviceModel:
    """One device block: fx, fy, cx, cy, width, height, rotation (9, row-major), translation (3)"""
    try:
        intrinsics = Intrinsics(
            fx=float(require(data, "fx", where)),
            fy=float(require(data, "fy", where)),
            cx=float(require(data, "cx", where)),
            cy=float(require(data, "cy", where)),
            width=int(require(data, "width", where)),
            height=int(require(data, "height", where)),
        )
    except DomainError as e:
        raise ConfigError(f"{where}: {e}") from e
    rotation = np.asarray(data.get("rotation", np.eye(3).ravel().tolist()), dtype=np.float64)
    translation = np.asarray(data.get("translation", [0.0, 0.0, 0.0]), dtype=np.float64)
    if rotation.size != 9 or translation.size != 3:
        raise ConfigError(f"{where}: rotation needs 9 values and translation 3")
    rotation = rotation.reshape(3, 3)
    if np.max(np.abs(rotation.T @ rotation - np.eye(3))) > CALIBRATION_ORTHONORMAL_TOL:
        raise ConfigError(f"{where}: rotation is not orthonormal")
    if np.linalg.det(rotation) < 0:
        raise ConfigError(f"{where}: rotation is a reflection")
    # printed decimals leave ~1e-9 residue; snap onto SO(3)
    return DeviceModel(intrinsics, nearest_rotation(rotation), translation)


def device_to_dict(device: DeviceModel) -> Dict[str, Any]:
    k = device.intrinsics
    return {
        "fx": float(k.fx), "fy": float(k.fy), "cx": float(k.cx), "cy": float(k.cy),
        "width": int(k.width), "height": int(k.height),
        "rotation": [float(x) for x in device.rotation.ravel()],
        "translation": [float(x) for x in device.translation],
    }


class CalibrationParser(BaseParser):
    """Parser for calibration YAML with `camera` and `projector` blocks"""

    @property
    def kind(self) -> str:
        return "calibration"

    def parse(self, file_path: Path) -> Rig:
        data = read_yaml(file_path)
        rig = Rig(
            camera=parse_device(require(data, "camera", str(file_path)), "camera"),
            projector=parse_device(require(data, "projector", str(file_path)), "projector"),
        )
        logger.debug("calibration %s: baseline %.4f m", file_path, rig.baseline)
        return rig
