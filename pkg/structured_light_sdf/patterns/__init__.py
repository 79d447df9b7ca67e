"""Projector pattern generators and pattern sampling"""

from .base import BasePatternGenerator
from .gray_code import GrayCodeGenerator, gen_gray_code, gray_decode, gray_encode
from .phase_shift import PhaseShiftGenerator, gen_phase_shift
from .random_binary import RandomBinaryGenerator, gen_random_multiscale
from .sampling import blur, blur_set, sample_bilinear, sample_grids

__all__ = [
    "BasePatternGenerator", "GrayCodeGenerator", "PhaseShiftGenerator", "RandomBinaryGenerator",
    "gen_gray_code", "gen_phase_shift", "gen_random_multiscale", "gray_encode", "gray_decode",
    "blur", "blur_set", "sample_bilinear", "sample_grids", "get_generator",
]


def get_generator(kind: str) -> BasePatternGenerator:
    """Get the generator for a pattern kind"""
    kind_lower = kind.lower()

    if kind_lower in ["random-binary", "random_binary", "random"]:
        return RandomBinaryGenerator()
    elif kind_lower in ["gray-code", "gray_code", "gray"]:
        return GrayCodeGenerator()
    elif kind_lower in ["phase-shift", "phase_shift", "phase"]:
        return PhaseShiftGenerator()
    else:
        raise ValueError(f"Unsupported pattern kind: {kind}")
