"""Binary-reflected Gray code column patterns"""

import math
from typing import Optional, Tuple

import numpy as np

from .base import BasePatternGenerator
from ..errors import DomainError
from ..models import Pattern, PatternKind, PatternSet

MAX_BITS = 12


def gray_encode(n):
    """Binary to Gray: g = n XOR (n >> 1)"""
    n = np.asarray(n, dtype=np.int64)
    return n ^ (n >> 1)


def gray_decode(g):
    """Gray to binary (prefix XOR over the bits)"""
    n = np.asarray(g, dtype=np.int64).copy()
    shift = n >> 1
    while np.any(shift):
        n ^= shift
        shift >>= 1
    return n


def default_shift(width: int, num_bits: int) -> int:
    """Column shift so that 2**num_bits code words cover the projector width"""
    return max(0, math.ceil(math.log2(width)) - num_bits)


def gen_gray_code(resolution: Tuple[int, int], num_bits: int, with_inverse: bool = False,
                  shift: Optional[int] = None) -> PatternSet:
    """Bit k (most significant first) of gray(column >> shift), one pattern per bit.

    With `with_inverse` every pattern is immediately followed by its complement.
    """
    height, width = BasePatternGenerator.check_resolution(resolution)
    if not 1 <= num_bits <= MAX_BITS:
        raise DomainError(f"num_bits must be in [1, {MAX_BITS}], got {num_bits}")
    if shift is None:
        shift = default_shift(width, num_bits)
    if (width - 1) >> shift >= 2 ** num_bits:
        raise DomainError(f"{num_bits} bits with shift {shift} cannot code {width} columns")

    codes = gray_encode(np.arange(width) >> shift)
    patterns = []
    for bit in range(num_bits):
        row = ((codes >> (num_bits - 1 - bit)) & 1).astype(np.float32)
        grid = np.broadcast_to(row, (height, width))
        meta = {"bit": bit, "num_bits": num_bits, "shift": shift}
        patterns.append(Pattern(grid, PatternKind.GRAY_CODE, dict(meta)))
        if with_inverse:
            patterns.append(Pattern(1.0 - grid, PatternKind.GRAY_CODE_INVERSE, dict(meta)))
    return PatternSet(patterns=patterns)


class GrayCodeGenerator(BasePatternGenerator):
    """Generator for Gray code column patterns, optionally with inverse pairs"""

    @property
    def kind(self) -> PatternKind:
        return PatternKind.GRAY_CODE

    def generate(self, resolution: Tuple[int, int], **params) -> PatternSet:
        return gen_gray_code(
            resolution,
            num_bits=params.get("num_bits", 7),
            with_inverse=params.get("with_inverse", False),
            shift=params.get("shift"),
        )
