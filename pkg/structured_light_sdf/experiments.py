"""End-to-end pipelines shared by the CLI: simulation, training, extraction and studies"""

import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np
from tqdm import tqdm

from .config import ExperimentConfig
from .decoders import correspondence_to_depth, decode_gray_fixed, get_decoder
from .depth import DepthMetrics, extract_depth, extract_depth_expected, mean_l1
from .errors import ConfigError, NumericalError
from .models import CaptureSet, DepthMap, DepthSource, LossWeights, PatternSet, TrainConfig
from .network import NeuralField, SdfNetwork, init_geometric
from .parsers.checkpoint import Checkpoint
from .patterns import blur_set, gen_gray_code, gen_phase_shift, get_generator
from .scene import SurfaceObservation, observe_scene, reference_ab, render_captures
from .training import Trainer, TrainState, add_pattern, create_state

logger = logging.getLogger(__name__)

GROUND_TRUTH_NOISE_OFFSET = 10_000  # noise stream keys of the ground-truth images
SWEEP_NOISE_OFFSET = 20_000
REFERENCE_NOISE_OFFSET = 30_000  # all-dark and all-bright exposures for Gray thresholds

ABLATION_VARIANTS: Dict[str, Tuple[bool, bool, bool]] = {
    # (rendered colour, surface colour, Eikonal)
    "rc": (True, False, False),
    "sc": (False, True, False),
    "rc+reg": (True, False, True),
    "sc+reg": (False, True, True),
    "rc+sc": (True, True, False),
    "full": (True, True, True),
}


def training_patterns(cfg: ExperimentConfig, count: Optional[int] = None,
                      order: Optional[str] = None) -> PatternSet:
    """Nominal training patterns; `count` raises per_scale until the set is large enough.

    Without an explicit `count` the pattern section's own `count` entry applies, if any.
    """
    options = dict(cfg.patterns)
    kind = options.pop("kind", "random-binary")
    options.pop("blur_sigma", None)
    configured = options.pop("count", None)
    if count is None and configured is not None:
        count = int(configured)
    resolution = cfg.rig.projector.intrinsics.resolution
    if count is not None and kind.startswith("random"):
        scales = options.get("scales", (20, 10, 5))
        options["per_scale"] = max(int(options.get("per_scale", 2)), math.ceil(count / len(scales)))
    options.setdefault("seed", cfg.seed)
    if order is not None:
        options["order"] = order
    patterns = get_generator(kind).generate(resolution, **options)
    if count is not None:
        if len(patterns) < count:
            raise ConfigError(f"pattern settings yield {len(patterns)} patterns, {count} needed")
        patterns = patterns.subset(count)
    return patterns


def ground_truth_patterns(cfg: ExperimentConfig) -> PatternSet:
    """Gray code with inverses followed by the phase-shift set"""
    section = cfg.raw["ground_truth"]
    resolution = cfg.rig.projector.intrinsics.resolution
    gray = gen_gray_code(resolution, int(section["gray_bits"]), with_inverse=True)
    phase = gen_phase_shift(resolution, float(section["wavelength"]), int(section["steps"]))
    return gray.extend(phase)


@dataclass
class Simulation:
    patterns: PatternSet
    captures: CaptureSet
    truth: DepthMap
    observation: SurfaceObservation


def simulate(cfg: ExperimentConfig, patterns: PatternSet,
             observation: Optional[SurfaceObservation] = None, first_index: int = 0,
             blur_sigma: Optional[float] = None, noise_sigma: Optional[float] = None) -> Simulation:
    """Capture a pattern set; the projector blur applies to what is physically projected"""
    rig = cfg.rig
    if observation is None:
        observation = observe_scene(cfg.scene, rig.camera, rig.projector, cfg.bounds)
    sigma = float(cfg.patterns.get("blur_sigma", 0.0)) if blur_sigma is None else blur_sigma
    projected = blur_set(patterns, sigma) if sigma > 0 else patterns
    captures, truth = render_captures(cfg.scene, rig.camera, rig.projector, projected, noise_sigma,
                                      cfg.seed, cfg.bounds, observation, first_index)
    return Simulation(patterns, captures, truth, observation)


def simulate_ground_truth(cfg: ExperimentConfig, observation: SurfaceObservation) -> Simulation:
    noise = cfg.raw["ground_truth"].get("noise_sigma")
    return simulate(cfg, ground_truth_patterns(cfg), observation, GROUND_TRUTH_NOISE_OFFSET,
                    blur_sigma=0.0, noise_sigma=noise)


def decode_ground_truth(cfg: ExperimentConfig, sim: Simulation) -> DepthMap:
    corr = get_decoder("phase-gray").decode(sim.captures, sim.patterns,
                                            {"b_floor": cfg.train.b_floor})
    return correspondence_to_depth(corr, cfg.rig.camera, cfg.rig.projector, DepthSource.PHASE_GT,
                                   cfg.bounds)


def new_state(cfg: ExperimentConfig, patterns: PatternSet, captures: CaptureSet,
              train: Optional[TrainConfig] = None, resume: Optional[Checkpoint] = None) -> TrainState:
    train = train or cfg.train
    if resume is not None:
        net, box = resume.net, resume.box
    else:
        net = cfg.new_network()
        section = cfg.raw["network"]
        init_geometric(net, float(section["init_radius"]), cfg.seed, float(section["init_inv_s"]))
        box = cfg.box
    state = create_state(net, box, cfg.rig.camera, cfg.rig.projector, patterns, captures, train,
                         cfg.bounds)
    if resume is not None:
        state.iteration = resume.iteration
        if resume.optimizer is not None:
            state.optimizer = resume.optimizer
    return state


def extract(cfg: ExperimentConfig, net: SdfNetwork, field_box=None, method: Optional[str] = None,
            progress: bool = False) -> DepthMap:
    section = cfg.raw["extract"]
    method = method or section.get("method", "root")
    field = NeuralField(net, field_box or cfg.box)
    chunk = int(section.get("chunk_size", 4096))
    if method == "root":
        return extract_depth(field.sdf_normalized, cfg.rig.camera, cfg.bounds,
                             int(section.get("samples_per_ray", 128)), chunk, progress)
    if method == "expected":
        return extract_depth_expected(field.sdf_normalized, net.s, cfg.rig.camera, cfg.bounds,
                                      cfg.train.k_coarse, cfg.train.k_fine, cfg.train.weight_mode,
                                      chunk, progress)
    raise ConfigError(f"unknown extraction method '{method}'")


def train_and_score(cfg: ExperimentConfig, patterns: PatternSet, captures: CaptureSet,
                    truth: DepthMap, train: Optional[TrainConfig] = None,
                    progress: bool = False) -> Tuple[TrainState, DepthMetrics]:
    state = new_state(cfg, patterns, captures, train)
    Trainer(state, train or cfg.train, progress=progress).fit()
    estimate = extract(cfg, state.net, state.box, progress=progress)
    return state, mean_l1(estimate, truth)


def run_sweep(cfg: ExperimentConfig, progress: bool = False) -> List[dict]:
    """Depth error against pattern count for the network and fixed-threshold Gray code.

    One row per pattern count; cells are medians over the configured seeds.
    """
    section = cfg.raw["sweep"]
    lo, hi = int(section["min_patterns"]), int(section["max_patterns"])
    if not 1 <= lo <= hi:
        raise ConfigError(f"invalid sweep range {lo}..{hi}")
    source = section.get("source", "gray")
    seeds = [int(s) for s in section.get("seeds", [cfg.seed])]
    resolution = cfg.rig.projector.intrinsics.resolution
    gray_bits = int(section.get("gray_bits", 9))
    if hi > gray_bits:
        raise ConfigError(f"sweep needs {hi} Gray bits but gray_bits is {gray_bits}")

    gray_full = gen_gray_code(resolution, gray_bits, shift=0)
    observation = observe_scene(cfg.scene, cfg.rig.camera, cfg.rig.projector, cfg.bounds)
    rows = []
    for count in tqdm(range(lo, hi + 1), disable=not progress, desc="sweep", unit="set"):
        neural, neural_cov, gray, gray_cov = [], [], [], []
        for seed in seeds:
            seeded = _with_seed(cfg, seed)
            gray_set = gray_full.subset(count)
            gray_sim = simulate(seeded, gray_set, observation, SWEEP_NOISE_OFFSET)
            a_ref, b_ref = reference_ab(seeded.scene, observation, seeded.scene.noise_sigma,
                                        seeded.seed, REFERENCE_NOISE_OFFSET)
            corr = decode_gray_fixed(gray_sim.captures.images, gray_set, a_ref, b_ref,
                                     b_floor=seeded.train.b_floor)
            gc_depth = correspondence_to_depth(corr, cfg.rig.camera, cfg.rig.projector,
                                               DepthSource.GRAY_CODE, cfg.bounds)
            gc = mean_l1(gc_depth, gray_sim.truth)
            gray.append(gc.mean_l1)
            gray_cov.append(gc.coverage)

            if source == "gray":
                sim = gray_sim
            else:
                # interleaved so every prefix mixes the square sizes
                sim = simulate(seeded, training_patterns(seeded, count, "interleaved"), observation)
            try:
                _, metrics = train_and_score(seeded, sim.patterns, sim.captures, sim.truth)
                neural.append(metrics.mean_l1)
                neural_cov.append(metrics.coverage)
            except NumericalError as e:
                logger.warning("sweep %d patterns seed %d diverged: %s", count, seed, e)
                neural.append(float("nan"))
                neural_cov.append(0.0)
        rows.append({
            "patterns": count,
            "source": source,
            "seeds": len(seeds),
            "neural_mean_l1": float(np.median(neural)),
            "neural_coverage": float(np.median(neural_cov)),
            "gray_mean_l1": float(np.median(gray)),
            "gray_coverage": float(np.median(gray_cov)),
        })
        logger.info("sweep %d patterns: neural %.6f, gray %.6f", count,
                    rows[-1]["neural_mean_l1"], rows[-1]["gray_mean_l1"])
    return rows


def _with_seed(cfg: ExperimentConfig, seed: int) -> ExperimentConfig:
    if seed == cfg.seed:
        return cfg
    raw = dict(cfg.raw)
    raw["seed"] = seed
    return ExperimentConfig.from_dict(raw)


def run_incremental(cfg: ExperimentConfig, progress: bool = False,
                    log_path: Optional[Path] = None) -> Tuple[TrainState, List[dict]]:
    """Start from the first few patterns and add one per interval, scoring every stage"""
    section = cfg.raw["incremental"]
    initial, final = int(section["initial_patterns"]), int(section["max_patterns"])
    interval = int(section["interval"])
    if not 1 <= initial <= final or interval < 1:
        raise ConfigError("incremental schedule needs 1 <= initial <= max and interval >= 1")
    if initial < 2:
        raise ConfigError("incremental runs need at least 2 initial patterns to estimate a and b")
    last_addition = (final - initial) * interval
    if last_addition > cfg.train.iterations:
        raise ConfigError(
            f"schedule adds its last pattern at {last_addition}, after {cfg.train.iterations} iterations"
        )

    full = simulate(cfg, training_patterns(cfg, final))
    state = new_state(cfg, full.patterns.subset(initial), full.captures.subset(initial))
    trainer = Trainer(state, cfg.train, log_path=log_path, progress=progress)
    rows = []
    stage = 0
    while True:
        count = len(state.patterns)
        stage_end = cfg.train.iterations if count == final else (stage + 1) * interval
        trainer.fit(stage_end)
        metrics = mean_l1(extract(cfg, state.net, state.box), full.truth)
        rows.append({"stage": stage, "patterns": count, "iteration": state.iteration,
                     "mean_l1": metrics.mean_l1, "coverage": metrics.coverage})
        logger.info("stage %d (%d patterns, iteration %d): mean L1 %.6f", stage, count,
                    state.iteration, metrics.mean_l1)
        if count == final:
            break
        add_pattern(state, full.patterns[count], full.captures.images[count])
        stage += 1
    return state, rows


def ablation_weights(variant: str, base: LossWeights) -> LossWeights:
    if variant not in ABLATION_VARIANTS:
        raise ConfigError(f"unknown ablation variant '{variant}', expected {sorted(ABLATION_VARIANTS)}")
    rc, sc, reg = ABLATION_VARIANTS[variant]
    return LossWeights(lambda_sc=base.lambda_sc if sc else 0.0,
                       lambda_reg=base.lambda_reg if reg else 0.0,
                       lambda_rc=base.lambda_rc if rc else 0.0)


def run_ablation(cfg: ExperimentConfig, variants: Optional[List[str]] = None,
                 progress: bool = False,
                 on_result: Optional[Callable[[dict], None]] = None) -> List[dict]:
    """Train one network per loss combination on the same captures and score each"""
    variants = variants or list(cfg.raw["ablation"]["variants"])
    sim = simulate(cfg, training_patterns(cfg))
    rows = []
    for variant in variants:
        weights = ablation_weights(variant, cfg.train.weights)
        train = TrainConfig(**{**cfg.train.__dict__, "weights": weights})
        if weights.lambda_rc == 0.0:
            # nothing drives the first phase without L_rc
            train.phase1_iterations = 0
        row = {"variant": variant, "lambda_rc": weights.lambda_rc, "lambda_sc": weights.lambda_sc,
               "lambda_reg": weights.lambda_reg}
        try:
            _, metrics = train_and_score(cfg, sim.patterns, sim.captures, sim.truth, train, progress)
            row.update(status="ok", mean_l1=metrics.mean_l1, coverage=metrics.coverage)
        except NumericalError as e:
            logger.warning("ablation variant %s diverged at iteration %s", variant, e.iteration)
            row.update(status="diverged", mean_l1=float("nan"), coverage=0.0)
        rows.append(row)
        if on_result is not None:
            on_result(row)
    return rows
