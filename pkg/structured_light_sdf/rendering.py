"""Volume rendering of pattern intensities along camera rays.

Weights come from the logistic density of the SDF (`eq3`, normalized per ray) or
from alpha compositing of the logistic CDF (`alpha`). Sample colours are
a + b P_i(π(x)); sample positions never carry gradients, SDF values and s do.
"""

import logging
from typing import Callable, Optional, Tuple

import numpy as np

from . import autodiff as ad
from .geometry import project_points
from .models import DeviceModel, Ray, RaySamples, RenderOutput, WeightMode
from .patterns.sampling import bilinear_stencil, sample_grids, stencil_corners

logger = logging.getLogger(__name__)

SdfFn = Callable[[np.ndarray], np.ndarray]

DENOM_FLOOR = 1e-30
SURFACE_EPS = 1e-6
ALPHA_EPS = 1e-10
PDF_PADDING = 1e-5


def stratified_t(count: int, k: int, bounds: Tuple[float, float],
                 rng: Optional[np.random.Generator]) -> Tuple[np.ndarray, np.ndarray]:
    """One sample per equal bin of [t_near, t_far]; bin midpoints when rng is None"""
    edges = np.linspace(bounds[0], bounds[1], k + 1)
    offsets = np.full((count, k), 0.5) if rng is None else rng.random((count, k))
    return edges[:-1] + offsets * np.diff(edges), edges


def sample_pdf(edges: np.ndarray, weights: np.ndarray, k: int,
               rng: Optional[np.random.Generator]) -> np.ndarray:
    """Inverse-CDF draws of k distances per ray from piecewise-constant bin weights (R, K)"""
    count = weights.shape[0]
    pdf = weights + PDF_PADDING
    pdf = pdf / pdf.sum(axis=-1, keepdims=True)
    cdf = np.concatenate([np.zeros((count, 1)), np.cumsum(pdf, axis=-1)], axis=-1)
    cdf[:, -1] = 1.0
    if rng is None:
        u = np.broadcast_to((np.arange(k) + 0.5) / k, (count, k))
    else:
        u = (np.arange(k) + rng.random((count, k))) / k
    idx = np.sum(cdf[:, None, :] <= u[:, :, None], axis=-1) - 1
    idx = np.clip(idx, 0, weights.shape[1] - 1)
    lo = np.take_along_axis(cdf, idx, axis=-1)
    hi = np.take_along_axis(cdf, idx + 1, axis=-1)
    frac = (u - lo) / np.maximum(hi - lo, DENOM_FLOOR)
    return edges[idx] + np.clip(frac, 0.0, 1.0) * (edges[idx + 1] - edges[idx])


def sample_rays(sdf_fn: SdfFn, origins: np.ndarray, directions: np.ndarray,
                bounds: Tuple[float, float], k_coarse: int, k_fine: int, s: float,
                weight_mode: WeightMode = WeightMode.EQ3,
                rng: Optional[np.random.Generator] = None) -> RaySamples:
    """Stratified coarse samples refined by importance samples from the coarse weights.

    `sdf_fn` maps world points (P, 3) to normalized signed distances. With rng=None
    sampling is deterministic (bin midpoints and evenly spaced CDF quantiles).
    """
    origins = np.asarray(origins, dtype=np.float64)
    directions = np.asarray(directions, dtype=np.float64)
    count = origins.shape[0]
    t, edges = stratified_t(count, k_coarse, bounds, rng)
    if k_fine > 0:
        points = origins[:, None, :] + t[..., None] * directions[:, None, :]
        sdf = np.asarray(sdf_fn(points.reshape(-1, 3))).reshape(count, k_coarse)
        coarse = np.asarray(compute_weights(sdf, s, t, weight_mode))
        fine = sample_pdf(edges, coarse, k_fine, rng)
        t = np.sort(np.concatenate([t, fine], axis=-1), axis=-1)
    points = origins[:, None, :] + t[..., None] * directions[:, None, :]
    return RaySamples(t=t, points=points, origins=origins, directions=directions)


def sample_ray(sdf_fn: SdfFn, ray: Ray, k_coarse: int, k_fine: int, seed: int, s: float,
               weight_mode: WeightMode = WeightMode.EQ3) -> RaySamples:
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(int(seed))))
    return sample_rays(sdf_fn, ray.origin[None], ray.direction[None], (ray.t_near, ray.t_far),
                       k_coarse, k_fine, s, weight_mode, rng)


def cell_widths(t: np.ndarray) -> np.ndarray:
    """Δt_i = (t_{i+1} - t_{i-1}) / 2 with mirrored virtual end samples"""
    t = np.asarray(t, dtype=np.float64)
    before = np.concatenate([2 * t[..., :1] - t[..., 1:2], t[..., :-1]], axis=-1)
    after = np.concatenate([t[..., 1:], 2 * t[..., -1:] - t[..., -2:-1]], axis=-1)
    return 0.5 * (after - before)


def logistic_density(sdf, s):
    """φ_s(x) = s e^{-sx} / (1 + e^{-sx})^2, written as s σ(sx) σ(-sx)"""
    sx = ad.mul(sdf, s)
    return ad.mul(ad.mul(ad.sigmoid(sx), ad.sigmoid(ad.neg(sx))), s)


def weights_eq3(sdf, s, t: np.ndarray):
    """Normalized density weights w_i = φ_s(f_i) Δt_i / Σ_k φ_s(f_k) Δt_k"""
    unnormalized = ad.mul(logistic_density(sdf, s), cell_widths(t))
    total = ad.maximum(ad.sum_(unnormalized, axis=-1, keepdims=True), DENOM_FLOOR)
    return ad.div(unnormalized, total)


def weights_alpha(sdf, s, t: np.ndarray):
    """Alpha compositing with α_i = max((Φ_i - Φ_{i+1}) / Φ_i, 0); the last sample gets 0"""
    cdf = ad.sigmoid(ad.mul(sdf, s))
    current = ad.getitem(cdf, (Ellipsis, slice(None, -1)))
    following = ad.getitem(cdf, (Ellipsis, slice(1, None)))
    alpha = ad.div(ad.sub(current, following), ad.add(current, ALPHA_EPS))
    alpha = ad.minimum(ad.maximum(alpha, 0.0), 1.0)
    log_keep = ad.log(ad.maximum(ad.sub(1.0, alpha), 1e-12))
    transmittance = ad.exp(ad.sub(ad.cumsum(log_keep, axis=-1), log_keep))
    weights = ad.mul(alpha, transmittance)
    zeros = np.zeros(ad.value(weights).shape[:-1] + (1,))
    return ad.concat([weights, zeros], axis=-1)


def compute_weights(sdf, s, t: np.ndarray, mode: WeightMode):
    if mode is WeightMode.ALPHA:
        return weights_alpha(sdf, s, t)
    return weights_eq3(sdf, s, t)


def _per_ray(values, count: int) -> np.ndarray:
    return np.broadcast_to(np.asarray(values, dtype=np.float64), (count,))


def sample_colors(points: np.ndarray, grids: np.ndarray, projector: DeviceModel,
                  a, b) -> Tuple[np.ndarray, np.ndarray]:
    """Colours a + b P_i(π(x)) at points (R, K, 3), shape (R, K, N), and the unlit flag.

    Points behind the projector or outside the pattern keep only the background a.
    """
    count = points.shape[0]
    uv, _ = project_points(projector, points)
    values, _, _, inside = sample_grids(grids, uv[..., 0], uv[..., 1])
    term = np.where(inside[..., None], values, 0.0)
    a = _per_ray(a, count)[:, None, None]
    b = _per_ray(b, count)[:, None, None]
    return a + b * term, ~inside


def render_pixel(samples: RaySamples, weights, grids: np.ndarray, projector: DeviceModel, a, b):
    """I'_i = Σ_k w_k (a + b P_i(π(x_k))) for every pattern, shape (R, N)"""
    colors, _ = sample_colors(samples.points, grids, projector, a, b)
    count, k = samples.t.shape
    rendered = ad.matmul(ad.reshape(weights, (count, 1, k)), colors)
    return ad.reshape(rendered, (count, colors.shape[-1]))


def expected_surface(samples: RaySamples, weights, normalized: bool = True):
    """Weighted mean sample position per ray, the defined mask and Σw.

    Normalized weights already sum to one; otherwise the mean is renormalized.
    Rays with Σw <= 1e-6 are undefined and their point is meaningless.
    """
    count, k = samples.t.shape
    weighted = ad.reshape(ad.matmul(ad.reshape(weights, (count, 1, k)), samples.points), (count, 3))
    weight_sum = ad.sum_(weights, axis=-1)
    defined = np.asarray(ad.value(weight_sum)) > SURFACE_EPS
    if normalized:
        return weighted, defined, weight_sum
    safe_sum = ad.where(defined, weight_sum, 1.0)
    return ad.div(weighted, ad.reshape(safe_sum, (count, 1))), defined, weight_sum


def project_surface(projector: DeviceModel, points):
    """π for (R, 3) points on the tape; returns u, v and the in-front mask"""
    local = ad.add(ad.matmul(points, projector.rotation.T), projector.translation)
    x = ad.getitem(local, (slice(None), 0))
    y = ad.getitem(local, (slice(None), 1))
    z = ad.getitem(local, (slice(None), 2))
    in_front = np.asarray(ad.value(z)) > 1e-9
    inv_z = ad.reciprocal(ad.where(in_front, z, 1.0))
    k = projector.intrinsics
    u = ad.add(ad.mul(ad.mul(x, inv_z), k.fx), k.cx)
    v = ad.add(ad.mul(ad.mul(y, inv_z), k.fy), k.cy)
    return u, v, in_front


def surface_color(surface, grids: np.ndarray, projector: DeviceModel, a, b):
    """Î_i = a + b P_i(π(s)) for expected surface points (R, 3), differentiable in s.

    Returns (R, N) intensities and a flag for points behind the projector or off
    the pattern, which contribute only a.
    """
    count = ad.value(surface).shape[0]
    u, v, in_front = project_surface(projector, surface)
    st = bilinear_stencil(grids.shape[1:], np.where(in_front, ad.value(u), np.nan),
                          np.where(in_front, ad.value(v), np.nan))
    p00, p10, p01, p11 = stencil_corners(grids, st)
    fu = ad.reshape(ad.sub(u, st.i0.astype(np.float64)), (count, 1))
    fv = ad.reshape(ad.sub(v, st.j0.astype(np.float64)), (count, 1))
    value = ad.add(ad.add(p00, ad.mul(fu, p10 - p00)), ad.mul(fv, p01 - p00))
    value = ad.add(value, ad.mul(ad.mul(fu, fv), p11 - p10 - p01 + p00))
    lit = st.inside
    value = ad.where(lit[:, None], value, 0.0)
    a = _per_ray(a, count)[:, None]
    b = _per_ray(b, count)[:, None]
    return ad.add(ad.mul(value, b), a), ~lit


def render(samples: RaySamples, sdf, s, grids: np.ndarray, projector: DeviceModel, a, b,
           weight_mode: WeightMode = WeightMode.EQ3) -> RenderOutput:
    """Full per-ray rendering from SDF values (R, K) at the samples"""
    weights = compute_weights(sdf, s, samples.t, weight_mode)
    rendered = render_pixel(samples, weights, grids, projector, a, b)
    surface, defined, weight_sum = expected_surface(
        samples, weights, normalized=weight_mode is WeightMode.EQ3
    )
    surface_rendered, _ = surface_color(surface, grids, projector, a, b)
    return RenderOutput(weights=weights, rendered=rendered, surface=surface,
                        surface_defined=defined, surface_rendered=surface_rendered,
                        weight_sum=weight_sum)
