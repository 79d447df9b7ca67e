"""Tests for the training step, the trainer loop and incremental pattern addition"""

import copy
import csv
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace

import numpy as np
import pytest

from structured_light_sdf.errors import ConfigError, NumericalError
from structured_light_sdf.models import LossWeights, Pattern, PatternKind, TrainConfig, WeightMode
from structured_light_sdf.rendering import SURFACE_EPS, compute_weights, sample_rays
from structured_light_sdf.training import LOG_COLUMNS, Trainer, add_pattern, train_step
from structured_light_sdf.training.trainer import _chunk_step, batch_generator, select_rays


def flat_params(state):
    return state.net.get_flat().copy()


class TestTrainStep:
    def test_step_advances_and_updates(self, tiny_state, tiny_train_config):
        before = flat_params(tiny_state)
        report = train_step(tiny_state, tiny_train_config)
        assert tiny_state.iteration == 1
        assert report.iteration == 0
        assert report.num_patterns == 3
        assert np.isfinite([report.l_rc, report.l_sc, report.l_reg, report.total]).all()
        assert not np.array_equal(before, flat_params(tiny_state))
        assert tiny_state.history == [report]

    def test_loss_decomposition_and_schedule(self, tiny_state, tiny_train_config):
        first = train_step(tiny_state, tiny_train_config)
        # iteration 0 is in the colour-only phase
        assert first.total == pytest.approx(first.l_rc + 0.1 * first.l_reg, rel=1e-12)
        second = train_step(tiny_state, tiny_train_config)
        assert second.total == pytest.approx(second.l_rc + second.l_sc + 0.1 * second.l_reg,
                                             rel=1e-12)

    def test_worker_count_does_not_change_the_result(self, tiny_state, tiny_train_config):
        serial = copy.deepcopy(tiny_state)
        parallel = copy.deepcopy(tiny_state)
        for _ in range(2):
            train_step(serial, tiny_train_config)
        with ThreadPoolExecutor(max_workers=2) as executor:
            for _ in range(2):
                train_step(parallel, tiny_train_config, executor)
        np.testing.assert_array_equal(flat_params(serial), flat_params(parallel))
        assert serial.history[-1].total == parallel.history[-1].total

    def test_same_seed_same_parameters(self, tiny_state, tiny_train_config):
        a = copy.deepcopy(tiny_state)
        b = copy.deepcopy(tiny_state)
        c = copy.deepcopy(tiny_state)
        train_step(a, tiny_train_config)
        train_step(b, tiny_train_config)
        train_step(c, replace(tiny_train_config, seed=1))
        np.testing.assert_array_equal(flat_params(a), flat_params(b))
        assert not np.array_equal(flat_params(a), flat_params(c))

    def test_alpha_weights_train(self, tiny_state, tiny_train_config):
        report = train_step(tiny_state, replace(tiny_train_config, weight_mode=WeightMode.ALPHA))
        assert np.isfinite(report.total)

    def test_non_finite_parameters(self, tiny_state, tiny_train_config):
        tiny_state.net.params["layer2.bias"] = np.array([np.nan])
        with pytest.raises(NumericalError) as excinfo:
            train_step(tiny_state, tiny_train_config)
        assert excinfo.value.iteration == 0
        assert tiny_state.iteration == 0

    def test_no_pixel_above_contrast_floor(self, tiny_state, tiny_train_config):
        with pytest.raises(ConfigError):
            train_step(tiny_state, replace(tiny_train_config, b_floor=1.0))

    def test_batches_avoid_low_contrast_pixels(self, tiny_state, tiny_train_config):
        idx = select_rays(tiny_state, tiny_train_config, batch_generator(0, 0))
        assert idx.shape == (32,)
        assert np.all(tiny_state.captures.b_map.ravel()[idx] > tiny_train_config.b_floor)


def test_pipeline_gradient_matches_finite_differences(tiny_state, tiny_train_config):
    """Gradient of the full weighted loss with respect to 64 sampled parameters"""
    state = tiny_state
    config = tiny_train_config
    idx = select_rays(state, config, batch_generator(0, 0))
    directions = state.directions[idx]
    origins = np.broadcast_to(state.camera.center, directions.shape)
    field = state.field
    samples = sample_rays(field.sdf_normalized, origins, directions, state.bounds,
                          config.k_coarse, config.k_fine, state.net.s)
    sdf = field.sdf_normalized(samples.points)
    defined = compute_weights(sdf, state.net.s, samples.t, WeightMode.EQ3).sum(axis=-1) > SURFACE_EPS
    n = len(state.patterns)
    captured = state.captures.images.reshape(n, -1)[:, idx].T
    a = state.captures.a_map.ravel()[idx]
    b = state.captures.b_map.ravel()[idx]
    scales = (idx.size * n, int(defined.sum()) * n, idx.size * samples.t.shape[1])
    lambdas = (1.0, 1.0, 0.1)

    def evaluate():
        result = _chunk_step(state, samples, slice(None), captured, a, b, defined, scales,
                             lambdas, WeightMode.EQ3)
        total = lambdas[0] * result.rc + lambdas[1] * result.sc + lambdas[2] * result.reg
        return total, result.grads

    _, grads = evaluate()
    analytic = np.concatenate([grads[name].ravel() for name in state.net.params])
    flat = state.net.get_flat()
    picked = np.random.default_rng(0).choice(flat.size, size=64, replace=False)
    h = 1e-6
    for i in picked:
        shifted = flat.copy()
        shifted[i] += h
        state.net.set_flat(shifted)
        plus, _ = evaluate()
        shifted[i] -= 2 * h
        state.net.set_flat(shifted)
        minus, _ = evaluate()
        state.net.set_flat(flat)
        numeric = (plus - minus) / (2 * h)
        assert analytic[i] == pytest.approx(numeric, rel=1e-3, abs=1e-7), f"parameter {i}"


class TestIncremental:
    def test_add_pattern_keeps_network_and_optimizer(self, tiny_state, tiny_train_config):
        train_step(tiny_state, tiny_train_config)
        optimizer = tiny_state.optimizer
        params = flat_params(tiny_state)
        pattern = Pattern(np.random.default_rng(5).integers(0, 2, size=(25, 40)), PatternKind.RANDOM_BINARY)
        image = np.full((32, 40), 0.5)
        add_pattern(tiny_state, pattern, image)
        assert len(tiny_state.patterns) == 4
        assert len(tiny_state.captures) == 4
        assert tiny_state.grids.shape == (4, 25, 40)
        assert tiny_state.optimizer is optimizer
        assert optimizer.step_count == 1
        np.testing.assert_array_equal(params, flat_params(tiny_state))
        report = train_step(tiny_state, tiny_train_config)
        assert report.num_patterns == 4

    def test_resolution_mismatch(self, tiny_state):
        with pytest.raises(ConfigError):
            add_pattern(tiny_state, Pattern(np.zeros((10, 10)), PatternKind.RANDOM_BINARY),
                        np.zeros((32, 40)))
        with pytest.raises(ConfigError):
            add_pattern(tiny_state, Pattern(np.zeros((25, 40)), PatternKind.RANDOM_BINARY),
                        np.zeros((10, 10)))


class TestTrainer:
    def test_fit_logs_and_checkpoints(self, tiny_state, tiny_train_config, tmp_path):
        config = replace(tiny_train_config, checkpoint_every=2)
        log_path = tmp_path / "train_log.csv"
        seen = []
        trainer = Trainer(tiny_state, config, log_path=log_path, checkpoint_dir=tmp_path / "ckpt")
        reports = trainer.fit(callback=lambda state, report: seen.append(report.iteration))
        assert len(reports) == 3 and seen == [0, 1, 2]
        with open(log_path, newline="", encoding="utf-8") as f:
            rows = list(csv.reader(f))
        assert rows[0] == LOG_COLUMNS
        assert [int(r[0]) for r in rows[1:]] == [0, 1, 2]
        assert float(rows[2][3]) == reports[1].l_sc
        assert sorted(p.name for p in (tmp_path / "ckpt").iterdir()) == ["checkpoint_000002.slsdf"]

    def test_fit_resumes_to_a_target(self, tiny_state, tiny_train_config):
        trainer = Trainer(tiny_state, tiny_train_config)
        trainer.fit(until=1)
        assert tiny_state.iteration == 1
        assert len(trainer.fit()) == 2
        assert trainer.fit() == []

    def test_workers_from_config(self, tiny_state, tiny_train_config):
        serial = copy.deepcopy(tiny_state)
        Trainer(serial, tiny_train_config).fit()
        Trainer(tiny_state, replace(tiny_train_config, workers=2)).fit()
        np.testing.assert_array_equal(flat_params(serial), flat_params(tiny_state))

    def test_checkpoint_needs_a_directory(self, tiny_state, tiny_train_config):
        with pytest.raises(ConfigError):
            Trainer(tiny_state, tiny_train_config).save_checkpoint()


@pytest.mark.parametrize("kwargs", [
    {"iterations": 10, "phase1_iterations": 20},
    {"k_coarse": 1},
    {"chunk_size": 0},
    {"workers": 0},
    {"batch_size": 0},
])
def test_invalid_train_config(kwargs):
    with pytest.raises(ConfigError):
        TrainConfig(**kwargs)


def test_lambda_sc_schedule():
    config = TrainConfig(iterations=10, phase1_iterations=4, weights=LossWeights(lambda_sc=0.5))
    assert [config.lambda_sc_at(i) for i in (0, 3, 4, 9)] == [0.0, 0.0, 0.5, 0.5]
