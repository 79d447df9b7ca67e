"""Synthetic rig: analytic SDF scenes, sphere tracing and captured-image synthesis"""

import logging
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from .errors import ConfigError, DomainError
from .geometry import DEPTH_EPS, device_depth, pixel_directions, pixel_grid, project_points
from .models import CaptureSet, DepthMap, DepthSource, DeviceModel, PatternSet, Ray
from .patterns.sampling import sample_grids

logger = logging.getLogger(__name__)

HIT_TOL = 1e-6
SHADOW_OFFSET = 1e-4
MAX_STEPS = 1024
SHAPES = ("plane", "sphere", "box")
PHOTOMETRIC_MODES = ("linear", "falloff")


@dataclass
class Primitive:
    """One exact-SDF primitive; `rotation` maps world to box-local axes"""
    shape: str
    center: np.ndarray = field(default_factory=lambda: np.zeros(3))
    normal: Optional[np.ndarray] = None  # plane: unit normal pointing to free space
    radius: float = 0.0  # sphere
    half_extents: Optional[np.ndarray] = None  # box
    rotation: np.ndarray = field(default_factory=lambda: np.eye(3))

    def __post_init__(self):
        if self.shape not in SHAPES:
            raise ConfigError(f"unknown primitive shape {self.shape!r}")
        self.center = np.asarray(self.center, dtype=np.float64).reshape(3)
        self.rotation = np.asarray(self.rotation, dtype=np.float64).reshape(3, 3)
        if self.shape == "plane":
            if self.normal is None:
                raise ConfigError("plane needs a normal")
            normal = np.asarray(self.normal, dtype=np.float64).reshape(3)
            self.normal = normal / np.linalg.norm(normal)
        elif self.shape == "sphere" and self.radius <= 0:
            raise ConfigError("sphere radius must be positive")
        elif self.shape == "box":
            if self.half_extents is None or np.any(np.asarray(self.half_extents) <= 0):
                raise ConfigError("box needs positive half_extents")
            self.half_extents = np.asarray(self.half_extents, dtype=np.float64).reshape(3)

    def sdf(self, points: np.ndarray) -> np.ndarray:
        p = points - self.center
        if self.shape == "plane":
            return p @ self.normal
        if self.shape == "sphere":
            return np.linalg.norm(p, axis=-1) - self.radius
        q = np.abs(p @ self.rotation.T) - self.half_extents
        outside = np.linalg.norm(np.maximum(q, 0.0), axis=-1)
        return outside + np.minimum(np.max(q, axis=-1), 0.0)


@dataclass
class AnalyticScene:
    """Min-union of primitives plus the linear photometric constants a0 and b0"""
    primitives: List[Primitive]
    ambient: float = 0.1
    contrast: float = 0.8
    noise_sigma: float = 0.01
    photometric: str = "linear"
    falloff_reference: float = 0.75

    def __post_init__(self):
        if not self.primitives:
            raise ConfigError("scene needs at least one primitive")
        if not 0.0 <= self.ambient < 1.0:
            raise ConfigError(f"ambient a0 must be in [0, 1), got {self.ambient}")
        if not 0.0 < self.contrast <= 1.0 - self.ambient:
            raise ConfigError(f"contrast b0 must be in (0, 1 - a0], got {self.contrast}")
        if self.noise_sigma < 0:
            raise ConfigError("noise_sigma must be non-negative")
        if self.photometric not in PHOTOMETRIC_MODES:
            raise ConfigError(f"photometric mode must be one of {PHOTOMETRIC_MODES}")


def scene_sdf(scene: AnalyticScene, points) -> np.ndarray:
    """Signed distance of points (..., 3); exact per primitive, a lower bound for unions"""
    points = np.asarray(points, dtype=np.float64)
    dist = scene.primitives[0].sdf(points)
    for primitive in scene.primitives[1:]:
        dist = np.minimum(dist, primitive.sdf(points))
    return dist


def scene_normals(scene: AnalyticScene, points: np.ndarray, h: float = 1e-6) -> np.ndarray:
    """Unit outward normals from central differences of the scene SDF"""
    grad = np.empty(points.shape, dtype=np.float64)
    for axis in range(3):
        offset = np.zeros(3)
        offset[axis] = h
        grad[..., axis] = scene_sdf(scene, points + offset) - scene_sdf(scene, points - offset)
    return grad / np.maximum(np.linalg.norm(grad, axis=-1, keepdims=True), 1e-30)


def trace_rays(scene: AnalyticScene, origins: np.ndarray, directions: np.ndarray,
               t_max, t_start=0.0, max_steps: int = MAX_STEPS) -> np.ndarray:
    """Vectorized sphere tracing; returns the first-hit distance per ray or NaN on a miss"""
    count = origins.shape[0]
    t_max = np.broadcast_to(np.asarray(t_max, dtype=np.float64), (count,))
    t = np.full(count, float(t_start)) if np.isscalar(t_start) else np.array(t_start, dtype=np.float64)
    hit = np.zeros(count, dtype=bool)
    active = np.ones(count, dtype=bool)
    for _ in range(max_steps):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        dist = scene_sdf(scene, origins[idx] + t[idx, None] * directions[idx])
        converged = dist < HIT_TOL
        hit[idx[converged]] = True
        t[idx] += np.where(converged, 0.0, dist)
        active[idx[converged | (t[idx] > t_max[idx])]] = False
    idx = np.flatnonzero(hit)
    for _ in range(4):
        # polish: the last step leaves up to HIT_TOL / cos(incidence) of slack
        t[idx] += scene_sdf(scene, origins[idx] + t[idx, None] * directions[idx])
    result = np.where(hit & (t <= t_max), t, np.nan)
    return result


def sphere_trace(scene: AnalyticScene, ray: Ray) -> Optional[Tuple[float, np.ndarray]]:
    """First surface hit along a ray as (t, point), or None when the ray escapes past t_far"""
    t = trace_rays(scene, ray.origin[None], ray.direction[None], ray.t_far)[0]
    if not np.isfinite(t):
        return None
    return float(t), ray.origin + t * ray.direction


def estimate_ab(images: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Per-pixel background a = min over images, contrast b = max - a"""
    images = np.asarray(images)
    if images.shape[0] < 2:
        raise DomainError("estimating a and b needs at least two images")
    a_map = images.min(axis=0)
    return a_map, images.max(axis=0) - a_map


def noise_generator(seed: int, image_index: int) -> np.random.Generator:
    """Counter-based stream keyed by (seed, image index), independent of scheduling"""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), int(image_index)])))


@dataclass
class SurfaceObservation:
    """What the camera sees through every pixel, independent of the patterns"""
    depth: np.ndarray  # camera-frame z, NaN on a miss
    hit: np.ndarray
    lit: np.ndarray
    proj_uv: np.ndarray  # (H, W, 2), NaN where unlit
    gain: np.ndarray  # photometric factor on b0, 1 in linear mode


def observe_scene(scene: AnalyticScene, camera: DeviceModel, projector: DeviceModel,
                  bounds: Tuple[float, float] = (0.5, 1.0)) -> SurfaceObservation:
    """Trace camera rays, test projector visibility and reproject lit points"""
    height, width = camera.intrinsics.resolution
    directions = pixel_directions(camera, pixel_grid(camera)).reshape(-1, 3)
    origins = np.broadcast_to(camera.center, directions.shape)
    t = trace_rays(scene, origins, directions, bounds[1])
    near = np.isfinite(t) & (t < bounds[0])
    if near.any():
        logger.warning("%d camera rays hit the scene closer than t_near=%g; marked as misses",
                       int(near.sum()), bounds[0])
    hit = np.isfinite(t) & ~near
    points = origins + np.where(hit, t, 0.0)[:, None] * directions

    lit = hit & (device_depth(projector, points) > DEPTH_EPS)
    idx = np.flatnonzero(lit)
    normals = scene_normals(scene, points[idx])
    starts = points[idx] + SHADOW_OFFSET * normals
    to_projector = projector.center - starts
    distance = np.linalg.norm(to_projector, axis=-1)
    blocked = np.isfinite(trace_rays(scene, starts, to_projector / distance[:, None], distance))
    lit[idx[blocked]] = False

    uv, _ = project_points(projector, points)
    ph, pw = projector.intrinsics.resolution
    inside = (uv[:, 0] >= 0) & (uv[:, 0] <= pw - 1) & (uv[:, 1] >= 0) & (uv[:, 1] <= ph - 1)
    lit &= inside
    uv[~lit] = np.nan

    gain = np.ones(points.shape[0])
    if scene.photometric == "falloff":
        idx = np.flatnonzero(lit)
        normals = scene_normals(scene, points[idx])
        to_projector = projector.center - points[idx]
        distance = np.linalg.norm(to_projector, axis=-1)
        cosine = np.clip(np.sum(normals * to_projector, axis=-1) / distance, 0.0, 1.0)
        gain[idx] = cosine * (scene.falloff_reference / distance) ** 2

    depth = np.where(hit, device_depth(camera, points), np.nan)
    logger.info("traced %d camera rays: %d hits, %d lit", hit.size, int(hit.sum()), int(lit.sum()))
    return SurfaceObservation(depth.reshape(height, width), hit.reshape(height, width),
                              lit.reshape(height, width), uv.reshape(height, width, 2),
                              gain.reshape(height, width))


def synthesize_images(scene: AnalyticScene, observation: SurfaceObservation,
                      patterns: PatternSet, noise_sigma: float, seed: int,
                      first_index: int = 0) -> np.ndarray:
    """I_i = a0 + b0 P_i(π(x)) at lit pixels, a0 elsewhere, plus clamped Gaussian noise"""
    values, _, _, _ = sample_grids(patterns.grids, observation.proj_uv[..., 0],
                                   observation.proj_uv[..., 1])
    return _expose(scene, observation, np.moveaxis(values, -1, 0), noise_sigma, seed, first_index)


def reference_ab(scene: AnalyticScene, observation: SurfaceObservation, noise_sigma: float,
                 seed: int, first_index: int) -> Tuple[np.ndarray, np.ndarray]:
    """a and b from one all-dark and one all-bright exposure"""
    shape = observation.lit.shape
    values = np.stack([np.zeros(shape), np.ones(shape)])
    dark, bright = _expose(scene, observation, values, noise_sigma, seed, first_index)
    return dark, np.clip(bright - dark, 0.0, None)


def _expose(scene: AnalyticScene, observation: SurfaceObservation, values: np.ndarray,
            noise_sigma: float, seed: int, first_index: int) -> np.ndarray:
    """Camera images for per-pixel projected values (N, H, W)"""
    height, width = observation.lit.shape
    signal = np.where(observation.lit, values * observation.gain, 0.0)
    images = scene.ambient + scene.contrast * signal
    if noise_sigma > 0:
        for i in range(images.shape[0]):
            rng = noise_generator(seed, first_index + i)
            images[i] += rng.normal(0.0, noise_sigma, size=(height, width))
    return np.clip(images, 0.0, 1.0)


def render_captures(scene: AnalyticScene, camera: DeviceModel, projector: DeviceModel,
                    patterns: PatternSet, noise_sigma: Optional[float] = None, seed: int = 0,
                    bounds: Tuple[float, float] = (0.5, 1.0),
                    observation: Optional[SurfaceObservation] = None,
                    first_index: int = 0) -> Tuple[CaptureSet, DepthMap]:
    """Simulate the camera images for a pattern set plus the ground-truth depth map.

    Ground truth is valid where the scene is hit and lit; a/b come from the images.
    `first_index` offsets the noise stream keys so separate sets stay independent.
    """
    if tuple(patterns.resolution) != tuple(projector.intrinsics.resolution):
        raise ConfigError(
            f"pattern resolution {patterns.resolution} does not match projector "
            f"{projector.intrinsics.resolution}"
        )
    if noise_sigma is None:
        noise_sigma = scene.noise_sigma
    if observation is None:
        observation = observe_scene(scene, camera, projector, bounds)
    images = synthesize_images(scene, observation, patterns, noise_sigma, seed, first_index)
    a_map, b_map = estimate_ab(images) if len(patterns) >= 2 else (images[0], np.zeros_like(images[0]))
    captures = CaptureSet(images=images, a_map=a_map, b_map=b_map, noise_sigma=float(noise_sigma))
    truth = DepthMap(observation.depth, observation.hit & observation.lit, DepthSource.SIMULATOR,
                     bounds[0], bounds[1])
    return captures, truth
