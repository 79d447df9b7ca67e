"""N-step phase decoding, Gray-code unwrapping and the median outlier pass"""

import logging
from typing import Optional, Tuple

import numpy as np
from scipy import ndimage

from .base import BaseDecoder
from .gray_code import DEFAULT_B_FLOOR, decode_gray_fixed, decode_gray_inverse, gray_layout
from ..errors import ConfigError
from ..models import CaptureSet, Correspondence, PatternKind, PatternSet

logger = logging.getLogger(__name__)


def decode_phase_shift(images: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Wrapped phase in (-π, π] and fringe contrast per pixel.

    For steps δ_k = 2πk/N the phase is atan2(-Σ I_k sin δ_k, Σ I_k cos δ_k); with four
    steps this is atan2(I_3 - I_1, I_0 - I_2). The contrast equals b for patterns
    spanning [0, 1].
    """
    images = np.asarray(images, dtype=np.float64)
    steps = images.shape[0]
    if steps < 3:
        raise ConfigError(f"phase decoding needs at least 3 images, got {steps}")
    deltas = 2.0 * np.pi * np.arange(steps) / steps
    sin_sum = np.tensordot(np.sin(deltas), images, axes=1)
    cos_sum = np.tensordot(np.cos(deltas), images, axes=1)
    if steps == 4:
        sin_sum = images[1] - images[3]
        cos_sum = images[0] - images[2]
    phase = np.arctan2(-sin_sum, cos_sum)
    phase = np.where(phase <= -np.pi, np.pi, phase)
    contrast = (4.0 / steps) * np.hypot(sin_sum, cos_sum)
    return phase, contrast


def unwrap_with_gray(phase: np.ndarray, gray: Correspondence, wavelength: float,
                     tolerance: Optional[float] = None,
                     proj_width: Optional[int] = None) -> Correspondence:
    """Absolute column = (k + φ/2π) λ with the period k closest to the Gray-code column.

    Pixels whose unwrapped column still differs from the Gray column by more than
    `tolerance` (default half a period) are rejected.
    """
    tolerance = wavelength / 2.0 if tolerance is None else tolerance
    frac = np.mod(phase, 2.0 * np.pi) / (2.0 * np.pi)
    gray_column = np.where(gray.valid, gray.column, 0.0)
    period = np.round((gray_column - wavelength * frac) / wavelength)
    column = (period + frac) * wavelength
    valid = gray.valid & np.isfinite(phase) & (np.abs(column - gray_column) <= tolerance)
    if proj_width is not None:
        valid &= (column >= 0) & (column <= proj_width - 1)
    margin = tolerance - np.abs(column - gray_column)
    return Correspondence(np.where(valid, column, np.nan), valid, np.where(valid, margin, 0.0))


def remove_outliers(corr: Correspondence, contrast: Optional[np.ndarray] = None,
                    b_floor: float = DEFAULT_B_FLOOR, max_deviation: float = 1.0,
                    size: int = 3) -> Correspondence:
    """Drop pixels deviating from their size x size median by more than max_deviation px,
    or with contrast below the floor.

    Invalid pixels take the column of their nearest valid pixel before filtering.
    """
    if not corr.valid.any():
        return corr
    nearest = ndimage.distance_transform_edt(~corr.valid, return_distances=False,
                                             return_indices=True)
    filled = corr.column[tuple(nearest)]
    median = ndimage.median_filter(filled, size=size, mode="nearest")
    keep = corr.valid & (np.abs(corr.column - median) <= max_deviation)
    if contrast is not None:
        keep &= contrast > b_floor
    logger.info("outlier pass removed %d of %d pixels", int(corr.valid.sum() - keep.sum()),
                int(corr.valid.sum()))
    return Correspondence(corr.column, keep, corr.confidence)


def split_ground_truth_set(patterns: PatternSet) -> Tuple[list, list]:
    """Indices of the Gray (with inverses) and phase patterns in a combined set"""
    gray = [i for i, p in enumerate(patterns)
            if p.kind in (PatternKind.GRAY_CODE, PatternKind.GRAY_CODE_INVERSE)]
    phase = [i for i, p in enumerate(patterns) if p.kind is PatternKind.PHASE_SHIFT]
    if not gray or not phase or len(gray) + len(phase) != len(patterns):
        raise ConfigError("phase-gray decoding needs a set of Gray and phase-shift patterns only")
    return gray, phase


class PhaseGrayDecoder(BaseDecoder):
    """Phase shifting unwrapped by Gray code; the ground-truth decoder"""

    def decode(self, captures: CaptureSet, patterns: PatternSet,
               config: Optional[dict] = None) -> Correspondence:
        config = config or {}
        b_floor = config.get("b_floor", DEFAULT_B_FLOOR)
        gray_idx, phase_idx = split_ground_truth_set(patterns)
        gray_set = PatternSet([patterns[i] for i in gray_idx])
        gray_images = captures.images[gray_idx]
        phase_images = captures.images[phase_idx]
        phase, contrast = decode_phase_shift(phase_images)
        if any(p.kind is PatternKind.GRAY_CODE_INVERSE for p in gray_set):
            gray = decode_gray_inverse(gray_images, gray_set, b_floor, interpolate=False)
            _, fringe_width, proj_width = gray_layout(PatternSet(list(gray_set)[0::2]))
        else:
            # the phase images average to a + b/2 and their contrast is b
            a_map = phase_images.mean(axis=0) - 0.5 * contrast
            gray = decode_gray_fixed(gray_images, gray_set, a_map, contrast, b_floor=b_floor,
                                     interpolate=False)
            _, fringe_width, proj_width = gray_layout(gray_set)

        wavelength = float(patterns[phase_idx[0]].meta["wavelength"])
        tolerance = config.get("tolerance", min(wavelength / 2.0, fringe_width + 1.0))
        corr = unwrap_with_gray(phase, gray, wavelength, tolerance, proj_width)
        if config.get("outliers", True):
            corr = remove_outliers(corr, contrast, b_floor, config.get("max_deviation", 1.0))
        logger.info("phase-gray decode: %d valid pixels", int(corr.valid.sum()))
        return corr

    def get_name(self) -> str:
        return "phase-gray"
