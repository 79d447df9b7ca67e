"""Tests for the positional encoding and the SDF network"""

import math

import numpy as np
import pytest

from structured_light_sdf import autodiff as ad
from structured_light_sdf.autodiff import Tape
from structured_light_sdf.errors import ConfigError
from structured_light_sdf.network import (
    EncodingConfig,
    NeuralField,
    SceneBox,
    SdfNetwork,
    denormalize_scene,
    encode,
    encode_tangents,
    init_geometric,
    normalize_scene,
)
from tests.conftest import make_tiny_net, numerical_gradient

POINTS = np.random.default_rng(3).uniform(-0.8, 0.8, size=(6, 3))


def unit_directions(count, seed=0):
    d = np.random.default_rng(seed).normal(size=(count, 3))
    return d / np.linalg.norm(d, axis=1, keepdims=True)


class TestEncoding:
    def test_layout(self):
        cfg = EncodingConfig(num_frequencies=2)
        assert cfg.output_dim == 15
        x = np.array([[0.1, -0.2, 0.3]])
        enc = encode(x, cfg)
        np.testing.assert_allclose(enc[0, :3], x[0])
        np.testing.assert_allclose(enc[0, 3:6], np.sin(math.pi * x[0]))
        np.testing.assert_allclose(enc[0, 6:9], np.cos(math.pi * x[0]))
        np.testing.assert_allclose(enc[0, 9:12], np.sin(2 * math.pi * x[0]))
        np.testing.assert_allclose(enc[0, 12:15], np.cos(2 * math.pi * x[0]))

    def test_without_raw_input(self):
        cfg = EncodingConfig(num_frequencies=3, include_input=False)
        assert encode(POINTS, cfg).shape == (6, 18)
        with pytest.raises(ConfigError):
            EncodingConfig(num_frequencies=0, include_input=False)

    def test_tangents_match_finite_differences(self):
        cfg = EncodingConfig(num_frequencies=3)
        tangents = encode_tangents(POINTS, cfg)
        h = 1e-6
        for axis in range(3):
            step = np.zeros(3)
            step[axis] = h
            fd = (encode(POINTS + step, cfg) - encode(POINTS - step, cfg)) / (2 * h)
            np.testing.assert_allclose(tangents[axis], fd, atol=1e-6)


class TestArchitecture:
    def test_layer_shapes_with_skip(self):
        net = SdfNetwork(hidden_layers=4, hidden_width=64, skip_layer=2)
        assert net.layer_shapes() == [(39, 64), (64, 25), (64, 64), (64, 64), (64, 1)]

    def test_multiply_adds_per_point(self):
        assert SdfNetwork(hidden_layers=4, hidden_width=64, skip_layer=2).multiply_adds() == 12_352
        assert SdfNetwork(hidden_layers=4, hidden_width=56, skip_layer=2).multiply_adds() == 9_464

    def test_layer_shapes_without_skip(self):
        net = SdfNetwork(hidden_layers=2, hidden_width=16, skip_layer=None,
                         encoding=EncodingConfig(num_frequencies=2))
        assert net.layer_shapes() == [(15, 16), (16, 16), (16, 1)]

    def test_invalid_architectures(self):
        with pytest.raises(ConfigError):
            SdfNetwork(hidden_layers=2, skip_layer=3)
        with pytest.raises(ConfigError):
            SdfNetwork(hidden_layers=2, hidden_width=32, skip_layer=1)
        with pytest.raises(ConfigError):
            SdfNetwork(hidden_layers=0)

    def test_flat_parameters_round_trip(self, tiny_net):
        flat = tiny_net.get_flat()
        assert flat.size == tiny_net.parameter_count()
        other = SdfNetwork.from_architecture(tiny_net.architecture())
        other.set_flat(flat)
        np.testing.assert_array_equal(other.forward(POINTS), tiny_net.forward(POINTS))
        assert other.s == pytest.approx(tiny_net.s)
        with pytest.raises(ConfigError):
            other.set_flat(flat[:-1])


class TestGeometricInit:
    @pytest.fixture(scope="class")
    def wide_net(self):
        net = SdfNetwork(hidden_layers=4, hidden_width=256, skip_layer=2)
        return init_geometric(net, radius=0.5, seed=0)

    def test_approximates_a_sphere(self, wide_net):
        dirs = unit_directions(400)
        for radius in (0.3, 0.8):
            values = wide_net.forward(radius * dirs)
            assert np.mean(values) == pytest.approx(radius - 0.5, abs=0.1)

    def test_inside_and_outside(self, wide_net):
        assert wide_net.forward(np.zeros((1, 3)))[0] < 0
        assert np.mean(wide_net.forward(unit_directions(200, seed=1))) > 0

    def test_initial_sharpness(self, tiny_net):
        assert tiny_net.inv_s == pytest.approx(0.3)

    def test_needs_raw_coordinates(self):
        net = SdfNetwork(hidden_layers=2, hidden_width=16, skip_layer=None,
                         encoding=EncodingConfig(num_frequencies=2, include_input=False))
        with pytest.raises(ConfigError):
            init_geometric(net)


class TestGradients:
    @pytest.mark.parametrize("skip_layer", [None, 1])
    def test_spatial_gradient_matches_finite_differences(self, skip_layer):
        net = make_tiny_net(seed=5, skip_layer=skip_layer) if skip_layer is None else \
            init_geometric(SdfNetwork(2, 32, skip_layer, EncodingConfig(num_frequencies=2)), seed=5)
        sdf, tangents = net.forward_with_gradient(POINTS)
        np.testing.assert_allclose(sdf, net.forward(POINTS))
        h = 1e-6
        for axis in range(3):
            step = np.zeros(3)
            step[axis] = h
            fd = (net.forward(POINTS + step) - net.forward(POINTS - step)) / (2 * h)
            np.testing.assert_allclose(tangents[axis], fd, atol=1e-6, rtol=1e-5)
        np.testing.assert_allclose(net.gradient(POINTS), np.moveaxis(tangents, 0, -1))

    def test_eikonal_term_is_differentiable_in_the_weights(self, tiny_net):
        name = "layer1.weight"
        w0 = tiny_net.params[name].copy()

        def penalty(weight):
            params = dict(tiny_net.params, **{name: weight})
            _, tangents = tiny_net.forward_with_gradient(POINTS, params)
            return ad.sum_(ad.square(ad.sum_(ad.square(tangents), axis=0) - 1.0))

        tape = Tape()
        leaf = tape.leaf(w0)
        grads = tape.backward(penalty(leaf))
        expected = numerical_gradient(penalty, w0)
        np.testing.assert_allclose(grads[leaf], expected, atol=1e-5, rtol=1e-4)


class TestSceneBox:
    def test_normalization_round_trip(self, box):
        world = np.array([[0.1, -0.05, 0.9]])
        normalized = normalize_scene(world, box)
        np.testing.assert_allclose(normalized, [[1 / 3, -1 / 6, 0.5]])
        np.testing.assert_allclose(denormalize_scene(normalized, box), world)

    def test_invalid_extent(self):
        with pytest.raises(ConfigError):
            SceneBox((0.0, 0.0, 0.0), 0.0)

    def test_field_reports_metres(self, tiny_net, box):
        field = NeuralField(tiny_net, box)
        world = np.array([[0.0, 0.0, 0.75], [0.0, 0.0, 0.95]])
        np.testing.assert_allclose(field.sdf(world), field.sdf_normalized(world) * 0.3)
