"""N-step sinusoidal phase-shifting patterns"""

from typing import Tuple

import numpy as np

from .base import BasePatternGenerator
from ..errors import DomainError
from ..models import Pattern, PatternKind, PatternSet


def gen_phase_shift(resolution: Tuple[int, int], wavelength: float = 16.0,
                    steps: int = 4) -> PatternSet:
    """Pattern k: 0.5 + 0.5 cos(2π column / wavelength + 2π k / steps)"""
    height, width = BasePatternGenerator.check_resolution(resolution)
    if wavelength < 4:
        raise DomainError(f"wavelength must be at least 4 px, got {wavelength}")
    if steps < 3:
        raise DomainError(f"phase shifting needs at least 3 steps, got {steps}")

    phase = 2.0 * np.pi * np.arange(width) / wavelength
    patterns = []
    for k in range(steps):
        row = 0.5 + 0.5 * np.cos(phase + 2.0 * np.pi * k / steps)
        grid = np.broadcast_to(np.clip(row, 0.0, 1.0), (height, width))
        meta = {"step": k, "steps": steps, "wavelength": float(wavelength),
                "phase_offset": 2.0 * np.pi * k / steps}
        patterns.append(Pattern(grid, PatternKind.PHASE_SHIFT, meta))
    return PatternSet(patterns=patterns)


class PhaseShiftGenerator(BasePatternGenerator):
    """Generator for sinusoidal fringes"""

    @property
    def kind(self) -> PatternKind:
        return PatternKind.PHASE_SHIFT

    def generate(self, resolution: Tuple[int, int], **params) -> PatternSet:
        return gen_phase_shift(
            resolution,
            wavelength=params.get("wavelength", 16.0),
            steps=params.get("steps", 4),
        )
