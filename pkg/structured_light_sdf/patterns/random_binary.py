"""Multi-scale random binary patterns (black/white unit squares)"""

import logging
from typing import List, Sequence, Tuple

import numpy as np

from .base import BasePatternGenerator
from ..errors import ConfigError, DomainError
from ..models import Pattern, PatternKind, PatternSet

logger = logging.getLogger(__name__)

ORDERS = ("coarse-to-fine", "interleaved")


def _square_grid(rng: np.random.Generator, height: int, width: int, scale: int) -> np.ndarray:
    rows = -(-height // scale)
    cols = -(-width // scale)
    cells = rng.integers(0, 2, size=(rows, cols)).astype(np.float32)
    grid = np.repeat(np.repeat(cells, scale, axis=0), scale, axis=1)
    return grid[:height, :width]


def gen_random_multiscale(resolution: Tuple[int, int], scales: Sequence[int] = (20, 10, 5),
                          per_scale: int = 2, seed: int = 0, order: str = "coarse-to-fine",
                          repeat_vertical: int = 1) -> PatternSet:
    """Tile the projector with random 0/1 squares, `per_scale` patterns per square size.

    Patterns are always drawn coarse-to-fine from one seeded generator, so the
    content of each pattern does not depend on `order`, only its position does.
    With `repeat_vertical` > 1 a band of height/repeat rows is drawn and stacked.
    """
    height, width = BasePatternGenerator.check_resolution(resolution)
    if per_scale < 1:
        raise DomainError("per_scale must be at least 1")
    if order not in ORDERS:
        raise ConfigError(f"unknown pattern order {order!r}, expected one of {ORDERS}")
    if repeat_vertical < 1:
        raise DomainError("repeat_vertical must be at least 1")
    band = -(-height // repeat_vertical)
    for scale in scales:
        if scale < 1 or scale > min(band, width):
            raise DomainError(f"square size {scale} outside [1, {min(band, width)}]")

    rng = np.random.default_rng(seed)
    drawn: List[List[Pattern]] = []
    for scale in scales:
        group = []
        for index in range(per_scale):
            tile = _square_grid(rng, band, width, int(scale))
            grid = np.tile(tile, (repeat_vertical, 1))[:height]
            group.append(Pattern(grid, PatternKind.RANDOM_BINARY,
                                 {"scale": int(scale), "index": index, "seed": int(seed)}))
        drawn.append(group)

    if order == "coarse-to-fine":
        patterns = [p for group in drawn for p in group]
    else:
        patterns = [group[i] for i in range(per_scale) for group in drawn]
    logger.debug("generated %d random binary patterns (scales=%s)", len(patterns), list(scales))
    return PatternSet(patterns=patterns, rng_seed=int(seed))


class RandomBinaryGenerator(BasePatternGenerator):
    """Generator for the multi-scale random binary training set"""

    @property
    def kind(self) -> PatternKind:
        return PatternKind.RANDOM_BINARY

    def generate(self, resolution: Tuple[int, int], **params) -> PatternSet:
        return gen_random_multiscale(
            resolution,
            scales=params.get("scales", (20, 10, 5)),
            per_scale=params.get("per_scale", 2),
            seed=params.get("seed", 0),
            order=params.get("order", "coarse-to-fine"),
            repeat_vertical=params.get("repeat_vertical", 1),
        )
