"""Gray code decoding with fixed-threshold or inverse-pair bit decisions"""

import logging
from typing import Optional, Tuple

import numpy as np

from .base import BaseDecoder
from ..errors import ConfigError, DomainError
from ..models import CaptureSet, Correspondence, PatternKind, PatternSet
from ..patterns.gray_code import gray_decode
from ..scene import estimate_ab

logger = logging.getLogger(__name__)

DEFAULT_B_FLOOR = 0.02


def gray_layout(patterns: PatternSet) -> Tuple[int, int, int]:
    """(bits used, fringe width in projector columns, projector width) of a Gray set.

    The patterns must carry the most significant bits 0..n-1 in order.
    """
    if len(patterns) == 0:
        raise ConfigError("empty Gray code pattern set")
    bits = [p.meta.get("bit") for p in patterns]
    if any(p.kind is not PatternKind.GRAY_CODE for p in patterns) or bits != list(range(len(bits))):
        raise ConfigError("expected Gray code patterns ordered by bit from the most significant")
    num_bits = int(patterns[0].meta["num_bits"])
    shift = int(patterns[0].meta["shift"])
    used = len(patterns)
    return used, 2 ** (shift + num_bits - used), patterns.resolution[1]


def bits_to_fringe(bits: np.ndarray) -> np.ndarray:
    """Most-significant-first bit planes (n, H, W) to the binary fringe index"""
    code = np.zeros(bits.shape[1:], dtype=np.int64)
    for plane in bits:
        code = (code << 1) | plane.astype(np.int64)
    return gray_decode(code)


def _interpolate_row(column: np.ndarray, fringe: np.ndarray, valid: np.ndarray, fringe_width: int):
    """Linear column ramps across runs bounded by transitions to both neighbouring fringes"""
    width = fringe.size
    breaks = np.flatnonzero((np.diff(fringe) != 0) | (np.diff(valid.astype(np.int8)) != 0)) + 1
    starts = np.concatenate([[0], breaks])
    ends = np.concatenate([breaks, [width]]) - 1
    for s, e in zip(starts, ends):
        if not valid[s]:
            continue
        f = fringe[s]
        if s == 0 or e == width - 1 or not (valid[s - 1] and valid[e + 1]):
            continue
        left, right = fringe[s - 1], fringe[e + 1]
        if abs(left - f) != 1 or abs(right - f) != 1 or left == right:
            continue
        # fringe f covers projector columns [f w - 0.5, (f + 1) w - 0.5)
        col_left = max(left, f) * fringe_width - 0.5
        col_right = max(right, f) * fringe_width - 0.5
        x_left, x_right = s - 0.5, e + 0.5
        xs = np.arange(s, e + 1)
        column[s:e + 1] = col_left + (col_right - col_left) * (xs - x_left) / (x_right - x_left)


def fringe_to_column(fringe: np.ndarray, valid: np.ndarray, fringe_width: int, proj_width: int,
                     interpolate: bool = True) -> Tuple[np.ndarray, np.ndarray]:
    """Sub-pixel projector column from fringe indices; falls back to the fringe center"""
    valid = valid & (fringe * fringe_width < proj_width)
    column = np.where(valid, fringe * fringe_width + (fringe_width - 1) / 2.0, np.nan)
    if interpolate and fringe_width > 1:
        for row in range(fringe.shape[0]):
            _interpolate_row(column[row], fringe[row], valid[row], fringe_width)
    column = np.where(valid, np.clip(column, 0.0, proj_width - 1), np.nan)
    return column, valid


def decode_gray_fixed(images: np.ndarray, patterns: PatternSet, a_map: np.ndarray,
                      b_map: np.ndarray, b_floor: float = DEFAULT_B_FLOOR,
                      interpolate: bool = True) -> Correspondence:
    """Bit k = [I_k > a + b/2]; inverse patterns in the set are ignored.

    a and b must come from images other than the Gray patterns alone: a full-on/full-off
    pair, the inverse images or the phase-shift set. Estimated from the Gray images
    themselves, the all-dark and all-bright codewords get b = 0 and are lost.
    """
    images = np.asarray(images, dtype=np.float64)
    keep = [i for i, p in enumerate(patterns) if p.kind is not PatternKind.GRAY_CODE_INVERSE]
    gray = PatternSet([patterns[i] for i in keep])
    used, fringe_width, proj_width = gray_layout(gray)
    images = images[keep]
    a_map = np.asarray(a_map, dtype=np.float64)
    b_map = np.asarray(b_map, dtype=np.float64)
    if a_map.shape != images.shape[1:] or b_map.shape != images.shape[1:]:
        raise DomainError(
            f"a/b maps {a_map.shape}, {b_map.shape} do not match images {images.shape[1:]}"
        )
    threshold = a_map + 0.5 * b_map
    bits = images > threshold
    fringe = bits_to_fringe(bits)
    column, valid = fringe_to_column(fringe, b_map > b_floor, fringe_width, proj_width, interpolate)
    confidence = np.abs(images - threshold).min(axis=0)
    logger.info("fixed-threshold Gray decode: %d bits, %d valid pixels", used, int(valid.sum()))
    return Correspondence(column, valid, confidence)


def decode_gray_inverse(images: np.ndarray, patterns: PatternSet, b_floor: float = DEFAULT_B_FLOOR,
                        interpolate: bool = True) -> Correspondence:
    """Bit k = [I_k > I_k_inverse] for a set alternating pattern/inverse"""
    images = np.asarray(images, dtype=np.float64)
    if len(patterns) % 2 or images.shape[0] % 2:
        raise ConfigError("inverse-pair decoding needs an even number of images")
    kinds = [p.kind for p in patterns]
    if kinds[0::2] != [PatternKind.GRAY_CODE] * (len(kinds) // 2) or \
            kinds[1::2] != [PatternKind.GRAY_CODE_INVERSE] * (len(kinds) // 2):
        raise ConfigError("images must alternate Gray pattern and inverse")
    used, fringe_width, proj_width = gray_layout(PatternSet(list(patterns)[0::2]))
    positive, negative = images[0::2], images[1::2]
    bits = positive > negative
    fringe = bits_to_fringe(bits)
    _, b_map = estimate_ab(images)
    column, valid = fringe_to_column(fringe, b_map > b_floor, fringe_width, proj_width, interpolate)
    confidence = np.abs(positive - negative).min(axis=0)
    logger.info("inverse-pair Gray decode: %d bits, %d valid pixels", used, int(valid.sum()))
    return Correspondence(column, valid, confidence)


class GrayFixedDecoder(BaseDecoder):
    """Fixed-threshold Gray code decoder.

    The threshold comes from `a_map`/`b_map` in the config when given, otherwise from the
    capture set, whose maps span the inverse images when the set has them.
    """

    def decode(self, captures: CaptureSet, patterns: PatternSet,
               config: Optional[dict] = None) -> Correspondence:
        config = config or {}
        a_map = config.get("a_map", captures.a_map)
        b_map = config.get("b_map", captures.b_map)
        return decode_gray_fixed(captures.images, patterns, a_map, b_map,
                                 b_floor=config.get("b_floor", DEFAULT_B_FLOOR),
                                 interpolate=config.get("interpolate", True))

    def get_name(self) -> str:
        return "gray-fixed"


class GrayInverseDecoder(BaseDecoder):
    """Inverse-pair Gray code decoder"""

    def decode(self, captures: CaptureSet, patterns: PatternSet,
               config: Optional[dict] = None) -> Correspondence:
        config = config or {}
        return decode_gray_inverse(captures.images, patterns,
                                   b_floor=config.get("b_floor", DEFAULT_B_FLOOR),
                                   interpolate=config.get("interpolate", True))

    def get_name(self) -> str:
        return "gray-inverse"
