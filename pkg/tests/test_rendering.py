"""Tests for ray sampling, rendering weights and rendered intensities"""

import numpy as np
import pytest

from structured_light_sdf.autodiff import Tape
from structured_light_sdf import autodiff as ad
from structured_light_sdf.geometry import pixel_directions, project_points
from structured_light_sdf.models import Pattern, PatternKind, PatternSet, Ray, WeightMode
from structured_light_sdf.patterns import gen_phase_shift, sample_grids
from structured_light_sdf.rendering import (
    cell_widths,
    compute_weights,
    expected_surface,
    logistic_density,
    project_surface,
    render,
    render_pixel,
    sample_pdf,
    sample_ray,
    sample_rays,
    stratified_t,
    surface_color,
    weights_alpha,
    weights_eq3,
)
from tests.conftest import numerical_gradient

PLANE_Z = 0.8
PIXELS = np.array([[19.5, 15.5], [14.0, 11.0], [26.0, 19.0], [8.0, 20.0]])


def plane_sdf(points):
    return PLANE_Z - np.asarray(points)[..., 2]


def camera_rays(camera):
    directions = pixel_directions(camera, PIXELS)
    return np.broadcast_to(camera.center, directions.shape).copy(), directions


def smooth_patterns(resolution):
    height, width = resolution
    ramp = np.tile(np.linspace(0.0, 1.0, width), (height, 1))
    phase = gen_phase_shift(resolution, wavelength=16.0, steps=3)
    return PatternSet([Pattern(ramp, PatternKind.RANDOM_BINARY)] + list(phase))


class TestWeights:
    def test_uniform_cell_widths(self):
        np.testing.assert_allclose(cell_widths(np.array([[0.0, 1.0, 2.0, 3.0]])), [[1.0] * 4])

    def test_mirrored_end_cells(self):
        widths = cell_widths(np.array([0.0, 1.0, 3.0]))
        np.testing.assert_allclose(widths, [1.0, 1.5, 2.0])

    def test_density_peak(self):
        assert logistic_density(0.0, 40.0) == pytest.approx(10.0)
        assert logistic_density(0.3, 40.0) == pytest.approx(logistic_density(-0.3, 40.0))

    def test_eq3_weights_sum_to_one(self):
        t = np.sort(np.random.default_rng(0).uniform(0.5, 1.0, size=(5, 40)), axis=-1)
        sdf = PLANE_Z - t
        weights = weights_eq3(sdf, 50.0, t)
        np.testing.assert_allclose(weights.sum(axis=-1), 1.0, atol=1e-12)
        assert np.all(weights >= 0)

    def test_eq3_peaks_at_the_crossing(self):
        t = np.linspace(0.5, 1.0, 101)[None]
        weights = weights_eq3(PLANE_Z - t, 50.0, t)
        assert t[0, np.argmax(weights)] == pytest.approx(PLANE_Z)

    def test_alpha_weights(self):
        t = np.linspace(0.5, 1.0, 101)[None]
        weights = weights_alpha(PLANE_Z - t, 50.0, t)
        assert weights[0, -1] == 0.0
        assert np.all(weights >= 0)
        assert weights.sum() == pytest.approx(1.0, abs=1e-3)
        assert abs(t[0, np.argmax(weights)] - PLANE_Z) <= 0.01

    def test_alpha_weights_vanish_in_free_space(self):
        t = np.linspace(0.5, 1.0, 64)[None]
        weights = compute_weights(np.full_like(t, 5.0), 50.0, t, WeightMode.ALPHA)
        assert weights.sum() < 1e-3

    def test_weights_are_differentiable_in_s(self):
        t = np.linspace(0.5, 1.0, 16)[None]
        sdf = PLANE_Z - t
        projection = np.linspace(-1.0, 1.0, 16)[None]
        for mode in WeightMode:
            def loss(s):
                return ad.sum_(ad.mul(compute_weights(sdf, s, t, mode), projection))

            tape = Tape()
            s = tape.leaf(20.0)
            grads = tape.backward(loss(s))
            assert grads[s] == pytest.approx(numerical_gradient(loss, np.array(20.0)), rel=1e-5)


class TestSampling:
    def test_stratified_midpoints(self):
        t, edges = stratified_t(2, 4, (0.5, 1.0), None)
        np.testing.assert_allclose(edges, [0.5, 0.625, 0.75, 0.875, 1.0])
        np.testing.assert_allclose(t[1], [0.5625, 0.6875, 0.8125, 0.9375])

    def test_stratified_jitter_stays_in_bins(self):
        t, edges = stratified_t(50, 8, (0.5, 1.0), np.random.default_rng(0))
        assert np.all(t >= edges[:-1]) and np.all(t <= edges[1:])

    def test_pdf_concentrates_in_heavy_bin(self):
        edges = np.linspace(0.0, 1.0, 9)
        weights = np.zeros((1, 8))
        weights[0, 3] = 1.0
        drawn = sample_pdf(edges, weights, 16, None)
        assert np.all(drawn >= edges[3]) and np.all(drawn <= edges[4])
        rng_drawn = sample_pdf(edges, weights, 16, np.random.default_rng(0))
        assert np.mean((rng_drawn >= edges[3]) & (rng_drawn <= edges[4])) > 0.9

    def test_deterministic_hierarchical_samples(self, small_rig):
        origins, directions = camera_rays(small_rig.camera)
        first = sample_rays(plane_sdf, origins, directions, (0.5, 1.0), 16, 8, 50.0)
        second = sample_rays(plane_sdf, origins, directions, (0.5, 1.0), 16, 8, 50.0)
        assert first.t.shape == (4, 24)
        np.testing.assert_array_equal(first.t, second.t)
        assert np.all(np.diff(first.t, axis=-1) >= 0)
        assert np.all((first.t >= 0.5) & (first.t <= 1.0))
        np.testing.assert_allclose(first.points, origins[:, None] + first.t[..., None] * directions[:, None])

    def test_fine_samples_cluster_at_the_surface(self, small_rig):
        origins, directions = camera_rays(small_rig.camera)
        samples = sample_rays(plane_sdf, origins, directions, (0.5, 1.0), 16, 32, 50.0)
        z = samples.points[..., 2]
        near = np.abs(z - PLANE_Z) < 0.05
        assert near.sum(axis=-1).min() >= 20

    def test_single_ray_is_seeded(self):
        ray = Ray(np.zeros(3), np.array([0.0, 0.0, 1.0]), 0.5, 1.0)
        a = sample_ray(plane_sdf, ray, 8, 4, seed=9, s=50.0)
        b = sample_ray(plane_sdf, ray, 8, 4, seed=9, s=50.0)
        np.testing.assert_array_equal(a.t, b.t)


class TestRenderedIntensity:
    def render_plane(self, rig, k, s=30.0):
        origins, directions = camera_rays(rig.camera)
        samples = sample_rays(plane_sdf, origins, directions, (0.6, 1.0), k, 0, s)
        sdf = plane_sdf(samples.points)
        weights = weights_eq3(sdf, s, samples.t)
        grids = smooth_patterns(rig.projector.intrinsics.resolution).grids
        rendered = render_pixel(samples, weights, grids, rig.projector, 0.1, 0.8)
        surface, defined, _ = expected_surface(samples, weights)
        return rendered, surface, defined

    def test_quadrature_matches_dense_reference(self, small_rig):
        coarse, coarse_surface, _ = self.render_plane(small_rig, 64)
        dense, dense_surface, _ = self.render_plane(small_rig, 4096)
        np.testing.assert_allclose(coarse, dense, atol=1e-3)
        np.testing.assert_allclose(coarse_surface, dense_surface, atol=1e-4)

    def test_expected_surface_lies_on_the_plane(self, small_rig):
        _, surface, defined = self.render_plane(small_rig, 256)
        assert defined.all()
        np.testing.assert_allclose(surface[:, 2], PLANE_Z, atol=2e-3)

    def test_constant_pattern_renders_a_plus_b(self, small_rig):
        origins, directions = camera_rays(small_rig.camera)
        samples = sample_rays(plane_sdf, origins, directions, (0.6, 1.0), 32, 0, 30.0)
        weights = weights_eq3(plane_sdf(samples.points), 30.0, samples.t)
        grids = np.ones((1,) + small_rig.projector.intrinsics.resolution)
        rendered = render_pixel(samples, weights, grids, small_rig.projector, 0.1, 0.8)
        np.testing.assert_allclose(rendered, 0.9, atol=1e-12)

    def test_surface_color_matches_pattern_lookup(self, small_rig):
        grids = smooth_patterns(small_rig.projector.intrinsics.resolution).grids
        origins, directions = camera_rays(small_rig.camera)
        points = origins + (PLANE_Z / directions[:, 2:3]) * directions
        values, flagged = surface_color(points, grids, small_rig.projector, 0.1, 0.8)
        uv, _ = project_points(small_rig.projector, points)
        lookup, _, _, inside = sample_grids(grids, uv[:, 0], uv[:, 1])
        assert inside.all() and not flagged.any()
        np.testing.assert_allclose(values, 0.1 + 0.8 * lookup, atol=1e-12)
        u, v, in_front = project_surface(small_rig.projector, points)
        assert in_front.all()
        np.testing.assert_allclose(np.stack([u, v], axis=-1), uv, atol=1e-12)

    def test_surface_color_gradient(self, small_rig):
        grids = smooth_patterns(small_rig.projector.intrinsics.resolution).grids
        origins, directions = camera_rays(small_rig.camera)
        # off texel boundaries so the bilinear stencil is stable under the finite-difference step
        points = origins + (0.8013 / directions[:, 2:3]) * directions
        projection = np.random.default_rng(1).normal(size=(len(PIXELS), len(grids)))

        def loss(p):
            values, _ = surface_color(p, grids, small_rig.projector, 0.1, 0.8)
            return ad.sum_(ad.mul(values, projection))

        tape = Tape()
        leaf = tape.leaf(points)
        grads = tape.backward(loss(leaf))
        np.testing.assert_allclose(grads[leaf], numerical_gradient(loss, points, h=1e-7),
                                   rtol=1e-4, atol=1e-6)

    def test_point_off_the_pattern_keeps_only_background(self, small_rig):
        grids = np.ones((1,) + small_rig.projector.intrinsics.resolution)
        values, flagged = surface_color(np.array([[5.0, 0.0, 0.8]]), grids, small_rig.projector,
                                        0.1, 0.8)
        assert flagged[0]
        assert values[0, 0] == pytest.approx(0.1)

    def test_render_bundles_every_output(self, small_rig):
        origins, directions = camera_rays(small_rig.camera)
        samples = sample_rays(plane_sdf, origins, directions, (0.6, 1.0), 32, 16, 200.0)
        grids = smooth_patterns(small_rig.projector.intrinsics.resolution).grids
        out = render(samples, plane_sdf(samples.points), 200.0, grids, small_rig.projector, 0.1, 0.8)
        assert out.rendered.shape == (4, 4)
        assert out.surface_rendered.shape == (4, 4)
        np.testing.assert_allclose(out.weight_sum, 1.0, atol=1e-12)
        np.testing.assert_allclose(out.rendered, out.surface_rendered, atol=0.02)
