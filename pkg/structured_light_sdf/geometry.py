"""Pinhole camera/projector geometry: rays, reprojection and triangulation"""

import logging
from typing import Tuple

import numpy as np

from .errors import DegenerateGeometryError, DomainError, ProjectionError
from .models import DeviceModel, Intrinsics, Ray

logger = logging.getLogger(__name__)

DEPTH_EPS = 1e-9
PARALLEL_TOL = 1e-6  # radians


def nearest_rotation(matrix: np.ndarray) -> np.ndarray:
    """Project a 3x3 matrix onto SO(3) (closest rotation in Frobenius norm)"""
    u, _, vt = np.linalg.svd(np.asarray(matrix, dtype=np.float64))
    rotation = u @ vt
    if np.linalg.det(rotation) < 0:
        u[:, -1] *= -1
        rotation = u @ vt
    return rotation


def look_at(intrinsics: Intrinsics, center, target, up=(0.0, -1.0, 0.0)) -> DeviceModel:
    """Device at `center` whose optical axis passes through `target`.

    Image y grows downwards, so the default `up` is world -y.
    """
    center = np.asarray(center, dtype=np.float64)
    z_axis = np.asarray(target, dtype=np.float64) - center
    z_axis /= np.linalg.norm(z_axis)
    x_axis = np.cross(-np.asarray(up, dtype=np.float64), z_axis)
    if np.linalg.norm(x_axis) < PARALLEL_TOL:
        raise DegenerateGeometryError("up vector is parallel to the viewing direction")
    x_axis /= np.linalg.norm(x_axis)
    y_axis = np.cross(z_axis, x_axis)
    rotation = nearest_rotation(np.stack([x_axis, y_axis, z_axis]))
    return DeviceModel(intrinsics, rotation, -rotation @ center)


def _check_pixel(device: DeviceModel, pixel: np.ndarray) -> None:
    k = device.intrinsics
    u, v = pixel[..., 0], pixel[..., 1]
    inside = (u >= -0.5) & (u <= k.width - 0.5) & (v >= -0.5) & (v <= k.height - 0.5)
    if not np.all(inside):
        raise DomainError(f"pixel outside the {k.width}x{k.height} image rectangle")


def pixel_directions(device: DeviceModel, pixels: np.ndarray) -> np.ndarray:
    """Unit world-frame back-projection directions for pixels (..., 2)"""
    pixels = np.asarray(pixels, dtype=np.float64)
    _check_pixel(device, pixels)
    k = device.intrinsics
    local = np.stack([
        (pixels[..., 0] - k.cx) / k.fx,
        (pixels[..., 1] - k.cy) / k.fy,
        np.ones(pixels.shape[:-1]),
    ], axis=-1)
    world = local @ device.rotation  # R^T applied to row vectors
    return world / np.linalg.norm(world, axis=-1, keepdims=True)


def pixel_grid(device: DeviceModel) -> np.ndarray:
    """Integer pixel centers (height, width, 2) in (u, v) order"""
    k = device.intrinsics
    v, u = np.mgrid[0:k.height, 0:k.width]
    return np.stack([u, v], axis=-1).astype(np.float64)


def pixel_to_ray(device: DeviceModel, pixel, bounds: Tuple[float, float]) -> Ray:
    """Ray from the device center through a (sub-)pixel"""
    direction = pixel_directions(device, np.asarray(pixel, dtype=np.float64)[None])[0]
    return Ray(device.center, direction, float(bounds[0]), float(bounds[1]))


def project_points(device: DeviceModel, points: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Vectorized reprojection; returns pixels (..., 2) and a front-of-device mask.

    Pixels of points at or behind the device plane are NaN.
    """
    local = device.to_device(np.asarray(points, dtype=np.float64))
    z = local[..., 2]
    in_front = z > DEPTH_EPS
    safe_z = np.where(in_front, z, 1.0)
    k = device.intrinsics
    uv = np.stack([k.fx * local[..., 0] / safe_z + k.cx,
                   k.fy * local[..., 1] / safe_z + k.cy], axis=-1)
    uv[~in_front] = np.nan
    return uv, in_front


def project(device: DeviceModel, point) -> np.ndarray:
    """π: perspective projection of one world point into device pixels"""
    uv, in_front = project_points(device, np.asarray(point, dtype=np.float64)[None])
    if not in_front[0]:
        raise ProjectionError("point is at or behind the device plane")
    return uv[0]


def device_depth(device: DeviceModel, points: np.ndarray) -> np.ndarray:
    """Device-frame z of world points"""
    return device.to_device(np.asarray(points, dtype=np.float64))[..., 2]


def depth_to_distance(device: DeviceModel, depth: np.ndarray) -> np.ndarray:
    """Ray distance from the device center for a per-pixel device-frame z map"""
    k = device.intrinsics
    depth = np.asarray(depth, dtype=np.float64)
    if depth.shape != tuple(k.resolution):
        raise DomainError(f"depth shape {depth.shape} does not match device {k.resolution}")
    v, u = np.indices(depth.shape)
    return depth * np.sqrt(((u - k.cx) / k.fx) ** 2 + ((v - k.cy) / k.fy) ** 2 + 1.0)


def column_planes(projector: DeviceModel, columns: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """World normals (..., 3) of the planes through projector columns, plus the plane point"""
    k = projector.intrinsics
    columns = np.asarray(columns, dtype=np.float64)
    local = np.stack([np.ones_like(columns), np.zeros_like(columns),
                      -(columns - k.cx) / k.fx], axis=-1)
    return local @ projector.rotation, projector.center


def triangulate_columns(camera: DeviceModel, cam_pixels: np.ndarray, projector: DeviceModel,
                        columns: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Vectorized camera-ray / projector-column-plane intersection.

    Returns camera-frame depth and a mask that is False where the ray is within
    PARALLEL_TOL of the plane or the intersection lies behind the camera.
    """
    directions = pixel_directions(camera, cam_pixels)
    normals, plane_point = column_planes(projector, columns)
    normals = normals / np.linalg.norm(normals, axis=-1, keepdims=True)
    denom = np.sum(normals * directions, axis=-1)
    ok = np.abs(denom) >= np.sin(PARALLEL_TOL)
    safe = np.where(ok, denom, 1.0)
    t = np.sum(normals * (plane_point - camera.center), axis=-1) / safe
    points = camera.center + t[..., None] * directions
    depth = device_depth(camera, points)
    ok &= np.isfinite(depth) & (depth > DEPTH_EPS)
    return np.where(ok, depth, np.nan), ok


def triangulate(camera: DeviceModel, cam_pixel, projector: DeviceModel, proj_column: float) -> float:
    """Depth of the camera pixel whose ray meets the given projector column plane"""
    depth, ok = triangulate_columns(camera, np.asarray(cam_pixel, dtype=np.float64)[None],
                                    projector, np.asarray([proj_column], dtype=np.float64))
    if not ok[0]:
        raise DegenerateGeometryError("camera ray is parallel to the projector column plane")
    return float(depth[0])
