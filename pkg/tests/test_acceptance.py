"""Full desk-scale runs on the reference scene; deselected unless run with `-m slow`"""

import math

import pytest

from structured_light_sdf import experiments
from structured_light_sdf.config import ExperimentConfig, load_config

pytestmark = pytest.mark.slow


def desk_config(**overrides) -> ExperimentConfig:
    return ExperimentConfig.from_dict(load_config(overrides=overrides))


@pytest.fixture(scope="module")
def desk():
    return desk_config()


@pytest.fixture(scope="module")
def reference_run(desk):
    sim = experiments.simulate(desk, experiments.training_patterns(desk))
    state, metrics = experiments.train_and_score(desk, sim.patterns, sim.captures, sim.truth)
    return sim, state, metrics


def test_six_patterns_reconstruct_the_reference_scene(reference_run):
    sim, state, metrics = reference_run
    assert len(sim.patterns) == 6
    assert state.iteration == 1000
    assert metrics.mean_l1 < 5e-3
    assert metrics.coverage > 0.9


def test_surface_sharpens_during_training(desk, reference_run):
    _, state, _ = reference_run
    initial = float(desk.raw["network"]["init_inv_s"])
    assert math.log(state.net.inv_s) < math.log(initial)
    assert state.history[-1].inv_s < state.history[0].inv_s


def test_surface_loss_improves_geometry(desk):
    rows = {r["variant"]: r for r in experiments.run_ablation(desk, ["rc+reg", "sc", "full"])}
    full, colour_only = rows["full"]["mean_l1"], rows["rc+reg"]["mean_l1"]
    assert full <= colour_only
    surface_only = rows["sc"]
    assert surface_only["status"] == "diverged" or surface_only["mean_l1"] > max(full, colour_only)


def test_more_patterns_help_and_beat_gray_code():
    neural, gray = {}, {}
    for count in (3, 6, 9):
        cfg = desk_config(sweep={"min_patterns": count, "max_patterns": count, "seeds": [0, 1, 2]})
        (row,) = experiments.run_sweep(cfg)
        neural[count], gray[count] = row["neural_mean_l1"], row["gray_mean_l1"]
    assert neural[9] <= neural[6] <= neural[3]
    assert neural[6] <= gray[6]
    assert neural[9] <= gray[9]


def test_incremental_training_matches_batch():
    cfg = desk_config(incremental={"initial_patterns": 3, "max_patterns": 9, "interval": 125})
    _, rows = experiments.run_incremental(cfg)
    assert [r["patterns"] for r in rows] == list(range(3, 10))
    sim = experiments.simulate(cfg, experiments.training_patterns(cfg, 9))
    _, batch = experiments.train_and_score(cfg, sim.patterns, sim.captures, sim.truth)
    assert rows[-1]["mean_l1"] <= 1.25 * batch.mean_l1
