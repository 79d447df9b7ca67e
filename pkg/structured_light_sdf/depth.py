"""Depth maps from a signed distance field, and depth-error metrics"""

import logging
from typing import Callable, NamedTuple, Tuple

import numpy as np
from tqdm import tqdm

from .errors import DomainError
from .geometry import depth_to_distance, device_depth, pixel_directions, pixel_grid
from .models import DepthMap, DepthSource, DeviceModel, WeightMode
from .rendering import compute_weights, sample_rays

logger = logging.getLogger(__name__)

SdfFn = Callable[[np.ndarray], np.ndarray]

BISECTION_STEPS = 30
EXPECTED_MIN_WEIGHT = 1e-3
BOUNDS_TOL = 1e-9


def _camera_rays(camera: DeviceModel) -> Tuple[np.ndarray, np.ndarray]:
    directions = pixel_directions(camera, pixel_grid(camera)).reshape(-1, 3)
    return np.broadcast_to(camera.center, directions.shape), directions


def _chunks(count: int, size: int, progress: bool, desc: str):
    return tqdm(range(0, count, size), disable=not progress, desc=desc, unit="chunk")


def restrict_to_bounds(depth_map: DepthMap, camera: DeviceModel) -> DepthMap:
    """Invalidate pixels whose ray distance lies outside the map's [t_near, t_far].

    Depth is camera-frame z while the bounds are ray distances, so z <= t on every ray.
    """
    distance = depth_to_distance(camera, np.where(depth_map.valid, depth_map.depth, 0.0))
    inside = ((distance >= depth_map.t_near - BOUNDS_TOL)
              & (distance <= depth_map.t_far + BOUNDS_TOL))
    valid = depth_map.valid & inside
    dropped = int(depth_map.valid.sum() - valid.sum())
    if dropped:
        logger.warning("%d pixels lie outside the ray bounds [%g, %g] and were invalidated",
                       dropped, depth_map.t_near, depth_map.t_far)
    return DepthMap(depth_map.depth, valid, depth_map.source, depth_map.t_near, depth_map.t_far)


def first_crossing(sdf_fn: SdfFn, origins: np.ndarray, directions: np.ndarray,
                   bounds: Tuple[float, float], samples_per_ray: int) -> np.ndarray:
    """Distance of the first outside-to-inside sign change per ray, NaN when there is none"""
    t = np.linspace(bounds[0], bounds[1], samples_per_ray)
    count = origins.shape[0]
    points = origins[:, None, :] + t[None, :, None] * directions[:, None, :]
    values = np.asarray(sdf_fn(points.reshape(-1, 3))).reshape(count, samples_per_ray)
    crossing = (values[:, :-1] > 0) & (values[:, 1:] <= 0)
    found = crossing.any(axis=1)
    first = np.argmax(crossing, axis=1)
    lo = t[first]
    hi = t[first + 1]
    for _ in range(BISECTION_STEPS):
        mid = 0.5 * (lo + hi)
        outside = np.asarray(sdf_fn(origins + mid[:, None] * directions)) > 0
        lo = np.where(outside, mid, lo)
        hi = np.where(outside, hi, mid)
    return np.where(found, 0.5 * (lo + hi), np.nan)


def extract_depth(sdf_fn: SdfFn, camera: DeviceModel, bounds: Tuple[float, float] = (0.5, 1.0),
                  samples_per_ray: int = 128, chunk_size: int = 4096,
                  progress: bool = False) -> DepthMap:
    """Camera-frame depth of the first zero crossing of the field along every pixel ray"""
    origins, directions = _camera_rays(camera)
    t = np.empty(directions.shape[0])
    for start in _chunks(t.size, chunk_size, progress, "extract"):
        rays = slice(start, start + chunk_size)
        t[rays] = first_crossing(sdf_fn, origins[rays], directions[rays], bounds, samples_per_ray)
    hit = np.isfinite(t)
    points = origins + np.where(hit, t, 0.0)[:, None] * directions
    depth = device_depth(camera, points).reshape(camera.intrinsics.resolution)
    valid = hit.reshape(depth.shape)
    logger.info("root-finding extraction: %d of %d pixels valid", int(valid.sum()), valid.size)
    return restrict_to_bounds(DepthMap(depth, valid, DepthSource.NEURAL, bounds[0], bounds[1]),
                              camera)


def extract_depth_expected(sdf_fn: SdfFn, s: float, camera: DeviceModel,
                           bounds: Tuple[float, float] = (0.5, 1.0), k_coarse: int = 32,
                           k_fine: int = 16, weight_mode: WeightMode = WeightMode.EQ3,
                           chunk_size: int = 4096, progress: bool = False) -> DepthMap:
    """Depth of the weight-averaged sample position; invalid where Σw < 1e-3"""
    origins, directions = _camera_rays(camera)
    count = directions.shape[0]
    surface = np.zeros((count, 3))
    weight_sum = np.zeros(count)
    for start in _chunks(count, chunk_size, progress, "extract"):
        rays = slice(start, start + chunk_size)
        samples = sample_rays(sdf_fn, origins[rays], directions[rays], bounds, k_coarse, k_fine,
                              s, weight_mode, rng=None)
        sdf = np.asarray(sdf_fn(samples.points.reshape(-1, 3))).reshape(samples.t.shape)
        weights = np.asarray(compute_weights(sdf, s, samples.t, weight_mode))
        weight_sum[rays] = weights.sum(axis=-1)
        safe = np.where(weight_sum[rays] > 0, weight_sum[rays], 1.0)
        surface[rays] = np.einsum("rk,rkc->rc", weights, samples.points) / safe[:, None]
    valid = weight_sum >= EXPECTED_MIN_WEIGHT
    depth = device_depth(camera, surface).reshape(camera.intrinsics.resolution)
    valid = valid.reshape(depth.shape)
    logger.info("expected-surface extraction: %d of %d pixels valid", int(valid.sum()), valid.size)
    return restrict_to_bounds(DepthMap(depth, valid, DepthSource.NEURAL, bounds[0], bounds[1]),
                              camera)


class DepthMetrics(NamedTuple):
    """Mean absolute depth error over pixels valid in both maps"""
    mean_l1: float
    coverage: float  # fraction of truth-valid pixels the estimate also covers
    both_valid: int
    error_map: np.ndarray  # |estimate - truth|, NaN outside the shared mask


def mean_l1(estimate: DepthMap, truth: DepthMap) -> DepthMetrics:
    if estimate.resolution != truth.resolution:
        raise DomainError(
            f"depth maps differ in resolution: {estimate.resolution} vs {truth.resolution}"
        )
    shared = estimate.valid & truth.valid
    error = np.where(shared, np.abs(estimate.depth - truth.depth), np.nan)
    count = int(shared.sum())
    truth_count = int(truth.valid.sum())
    mean = float(np.sum(error[shared]) / count) if count else float("nan")
    coverage = count / truth_count if truth_count else 0.0
    return DepthMetrics(mean, coverage, count, error)


def depth_to_points(depth_map: DepthMap, camera: DeviceModel) -> np.ndarray:
    """Camera-frame 3D points (P, 3) of the valid pixels"""
    k = camera.intrinsics
    v, u = np.nonzero(depth_map.valid)
    z = depth_map.depth[v, u]
    return np.stack([(u - k.cx) / k.fx * z, (v - k.cy) / k.fy * z, z], axis=-1)
