"""Classical decoders: Gray code and phase shifting with Gray-code unwrapping"""

from .base import BaseDecoder
from .gray_code import GrayFixedDecoder, GrayInverseDecoder, decode_gray_fixed, decode_gray_inverse
from .phase_shift import (
    PhaseGrayDecoder,
    decode_phase_shift,
    remove_outliers,
    unwrap_with_gray,
)
from .triangulation import correspondence_to_depth

__all__ = [
    "BaseDecoder", "GrayFixedDecoder", "GrayInverseDecoder", "PhaseGrayDecoder",
    "decode_gray_fixed", "decode_gray_inverse", "decode_phase_shift", "unwrap_with_gray",
    "remove_outliers", "correspondence_to_depth", "get_decoder",
]


def get_decoder(name: str) -> BaseDecoder:
    """Get the decoder registered under a name"""
    name_lower = name.lower()

    if name_lower in ["gray-fixed", "gray_fixed", "gc"]:
        return GrayFixedDecoder()
    elif name_lower in ["gray-inverse", "gray_inverse", "gc-inv"]:
        return GrayInverseDecoder()
    elif name_lower in ["phase-gray", "phase_gray", "ps"]:
        return PhaseGrayDecoder()
    else:
        raise ValueError(f"Unsupported decoder: {name}")
