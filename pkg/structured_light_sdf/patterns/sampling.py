"""Projector scatter blur and bilinear pattern sampling with analytic gradients"""

from typing import NamedTuple, Tuple

import numpy as np
from scipy import ndimage

from ..errors import DomainError
from ..models import Pattern, PatternSet


def blur(pattern: Pattern, sigma: float) -> Pattern:
    """Separable Gaussian blur with reflective borders; sigma=0 returns the grid unchanged"""
    if sigma < 0:
        raise DomainError(f"blur sigma must be non-negative, got {sigma}")
    meta = dict(pattern.meta)
    if sigma == 0:
        return Pattern(pattern.grid.copy(), pattern.kind, meta)
    grid = pattern.grid.astype(np.float64)
    grid = ndimage.gaussian_filter1d(grid, sigma, axis=0, mode="reflect")
    grid = ndimage.gaussian_filter1d(grid, sigma, axis=1, mode="reflect")
    meta["blur_sigma"] = float(sigma)
    return Pattern(np.clip(grid, 0.0, 1.0), pattern.kind, meta)


def blur_set(patterns: PatternSet, sigma: float) -> PatternSet:
    return PatternSet([blur(p, sigma) for p in patterns], rng_seed=patterns.rng_seed)


class Stencil(NamedTuple):
    """Bilinear cell lookup for a batch of (u, v) positions"""
    i0: np.ndarray  # column of the left texel
    j0: np.ndarray  # row of the top texel
    fu: np.ndarray  # fractional offsets in [0, 1], clamped
    fv: np.ndarray
    inside: np.ndarray  # position lies in [0, W-1] x [0, H-1]


def bilinear_stencil(shape: Tuple[int, int], u: np.ndarray, v: np.ndarray) -> Stencil:
    """Texel centers sit on integer coordinates; outside positions are clamped to the border"""
    height, width = shape
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    finite = np.isfinite(u) & np.isfinite(v)
    inside = finite & (u >= 0) & (u <= width - 1) & (v >= 0) & (v <= height - 1)
    uc = np.clip(np.where(finite, u, 0.0), 0.0, width - 1)
    vc = np.clip(np.where(finite, v, 0.0), 0.0, height - 1)
    i0 = np.clip(np.floor(uc).astype(np.int64), 0, max(width - 2, 0))
    j0 = np.clip(np.floor(vc).astype(np.int64), 0, max(height - 2, 0))
    return Stencil(i0, j0, uc - i0, vc - j0, inside)


def stencil_corners(grids: np.ndarray, st: Stencil):
    """Corner texel values (..., N) of every pattern in `grids` (N, H, W)"""
    grids = np.asarray(grids, dtype=np.float64)
    p00 = np.moveaxis(grids[:, st.j0, st.i0], 0, -1)
    p10 = np.moveaxis(grids[:, st.j0, st.i0 + 1], 0, -1)
    p01 = np.moveaxis(grids[:, st.j0 + 1, st.i0], 0, -1)
    p11 = np.moveaxis(grids[:, st.j0 + 1, st.i0 + 1], 0, -1)
    return p00, p10, p01, p11


def sample_grids(grids: np.ndarray, u: np.ndarray, v: np.ndarray):
    """Bilinear samples of N patterns at positions (...).

    Returns values (..., N), d/du (..., N), d/dv (..., N) and the in-bounds mask (...).
    Clamped positions report the border value and a zero gradient.
    """
    grids = np.asarray(grids)
    st = bilinear_stencil(grids.shape[1:], u, v)
    p00, p10, p01, p11 = stencil_corners(grids, st)
    fu = st.fu[..., None]
    fv = st.fv[..., None]
    value = p00 + fu * (p10 - p00) + fv * (p01 - p00) + fu * fv * (p11 - p10 - p01 + p00)
    du = (p10 - p00) + fv * (p11 - p10 - p01 + p00)
    dv = (p01 - p00) + fu * (p11 - p10 - p01 + p00)
    du = np.where(st.inside[..., None], du, 0.0)
    dv = np.where(st.inside[..., None], dv, 0.0)
    return value, du, dv, st.inside


def sample_bilinear(pattern: Pattern, uv) -> Tuple[float, np.ndarray, bool]:
    """Intensity at sub-pixel (u, v), its gradient d/d(u, v), and an out-of-bounds flag"""
    uv = np.asarray(uv, dtype=np.float64)
    value, du, dv, inside = sample_grids(pattern.grid[None], uv[0:1], uv[1:2])
    return float(value[0, 0]), np.array([du[0, 0], dv[0, 0]]), not bool(inside[0])
