"""16-bit graymap helpers shared by the image-set parsers and exporters"""

from pathlib import Path

import cv2
import numpy as np

from ..errors import ConfigError

GRAY_MAX = 65535


def read_gray16(file_path: Path) -> np.ndarray:
    """A 16-bit graymap as float64 in [0, 1]"""
    image = cv2.imread(str(file_path), cv2.IMREAD_UNCHANGED)
    if image is None:
        raise ConfigError(f"cannot read image {file_path}")
    if image.ndim != 2 or image.dtype != np.uint16:
        raise ConfigError(f"{file_path}: expected a single-channel 16-bit image")
    return image.astype(np.float64) / GRAY_MAX


def write_gray16(file_path: Path, values: np.ndarray) -> Path:
    quantized = np.round(np.clip(values, 0.0, 1.0) * GRAY_MAX).astype(np.uint16)
    if not cv2.imwrite(str(file_path), quantized):
        raise ConfigError(f"cannot write image {file_path}")
    return Path(file_path)


def fits_gray16(values: np.ndarray) -> bool:
    """True when a float32 grid survives write_gray16/read_gray16 unchanged"""
    values = np.asarray(values, dtype=np.float32)
    restored = (np.round(values.astype(np.float64) * GRAY_MAX) / GRAY_MAX).astype(np.float32)
    return bool(np.array_equal(restored, values))
