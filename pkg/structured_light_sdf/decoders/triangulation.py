"""Depth from decoded projector columns"""

import logging
from typing import Tuple

import numpy as np

from ..errors import DomainError
from ..depth import restrict_to_bounds
from ..geometry import pixel_grid, triangulate_columns
from ..models import Correspondence, DepthMap, DepthSource, DeviceModel

logger = logging.getLogger(__name__)


def correspondence_to_depth(corr: Correspondence, camera: DeviceModel, projector: DeviceModel,
                            source: DepthSource = DepthSource.PHASE_GT,
                            bounds: Tuple[float, float] = (0.5, 1.0)) -> DepthMap:
    """Triangulate every valid pixel; degenerate intersections and points outside the
    ray bounds become invalid"""
    resolution = camera.intrinsics.resolution
    if corr.column.shape != tuple(resolution):
        raise DomainError(f"correspondence shape {corr.column.shape} does not match camera {resolution}")
    depth = np.full(resolution, np.nan)
    valid = corr.valid.copy()
    if valid.any():
        pixels = pixel_grid(camera)[valid]
        values, ok = triangulate_columns(camera, pixels, projector, corr.column[valid])
        depth[valid] = values
        valid[valid] = ok
    logger.info("triangulated %d of %d pixels", int(valid.sum()), valid.size)
    return restrict_to_bounds(DepthMap(depth, valid, source, bounds[0], bounds[1]), camera)
