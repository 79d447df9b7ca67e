"""Training loop: ray batches, chunked tapes, the λ_sc schedule and incremental patterns"""

import csv
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np
from tqdm import tqdm

from .. import autodiff as ad
from ..errors import ConfigError, NumericalError
from ..geometry import pixel_directions, pixel_grid
from ..models import CaptureSet, DeviceModel, LossReport, Pattern, PatternSet, TrainConfig, WeightMode
from ..network import NeuralField, SceneBox, SdfNetwork, normalize_scene
from ..rendering import compute_weights, render, sample_rays, SURFACE_EPS
from ..scene import estimate_ab
from .losses import loss_rc, loss_reg, loss_sc
from .optimizer import Adam

logger = logging.getLogger(__name__)

LOG_COLUMNS = ["iteration", "N", "L_rc", "L_sc", "L_reg", "total", "inv_s", "wall_time"]


@dataclass
class TrainState:
    """Everything a training run mutates between steps"""
    net: SdfNetwork
    box: SceneBox
    camera: DeviceModel
    projector: DeviceModel
    patterns: PatternSet
    captures: CaptureSet
    optimizer: Adam
    bounds: Tuple[float, float] = (0.5, 1.0)
    iteration: int = 0
    history: List[LossReport] = field(default_factory=list)

    def __post_init__(self):
        if len(self.patterns) != len(self.captures):
            raise ConfigError(
                f"{len(self.patterns)} patterns but {len(self.captures)} captured images"
            )
        if tuple(self.captures.resolution) != tuple(self.camera.intrinsics.resolution):
            raise ConfigError("captured images do not match the camera resolution")
        self._directions = pixel_directions(self.camera, pixel_grid(self.camera)).reshape(-1, 3)
        self._grids = self.patterns.grids.astype(np.float64)

    @property
    def field(self) -> NeuralField:
        return NeuralField(self.net, self.box)

    @property
    def grids(self) -> np.ndarray:
        return self._grids

    @property
    def directions(self) -> np.ndarray:
        return self._directions


def create_state(net: SdfNetwork, box: SceneBox, camera: DeviceModel, projector: DeviceModel,
                 patterns: PatternSet, captures: CaptureSet, config: TrainConfig,
                 bounds: Tuple[float, float] = (0.5, 1.0)) -> TrainState:
    optimizer = Adam(config.learning_rate, config.beta1, config.beta2, config.eps)
    return TrainState(net, box, camera, projector, patterns, captures, optimizer, tuple(bounds))


def batch_generator(seed: int, iteration: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), int(iteration)])))


def select_rays(state: TrainState, config: TrainConfig, rng: np.random.Generator) -> np.ndarray:
    """Flat pixel indices of one batch, drawn from pixels whose contrast b clears the floor"""
    candidates = np.flatnonzero(state.captures.b_map.ravel() > config.b_floor)
    if candidates.size == 0:
        raise ConfigError(f"no camera pixel has fringe contrast above {config.b_floor}")
    replace = candidates.size < config.batch_size
    return rng.choice(candidates, size=config.batch_size, replace=replace)


@dataclass
class _ChunkResult:
    rc: float
    sc: float
    reg: float
    grads: Dict[str, np.ndarray]


def _chunk_step(state: TrainState, samples, rays: slice, captured: np.ndarray, a: np.ndarray,
                b: np.ndarray, defined: np.ndarray, scales: Tuple[float, float, float],
                lambdas: Tuple[float, float, float], weight_mode: WeightMode) -> _ChunkResult:
    """Loss contributions and parameter gradients of one ray chunk on its own tape"""
    tape = ad.Tape()
    params = {name: tape.leaf(value, name) for name, value in state.net.params.items()}
    t = samples.t[rays]
    points = samples.points[rays]
    count, k = t.shape
    normalized = normalize_scene(points.reshape(-1, 3), state.box)
    sdf, tangents = state.net.forward_with_gradient(normalized, params)
    s = ad.exp(params["log_s"])
    chunk = type(samples)(t=t, points=points, origins=samples.origins[rays],
                          directions=samples.directions[rays])
    out = render(chunk, ad.reshape(sdf, (count, k)), s, state.grids, state.projector,
                 a[rays], b[rays], weight_mode)

    rc_norm, sc_norm, reg_norm = scales
    l_rc = loss_rc(out.rendered, captured[rays], normalizer=rc_norm)
    l_sc = loss_sc(out.surface_rendered, captured[rays], mask=defined[rays],
                   normalizer=sc_norm if sc_norm > 0 else 1.0)
    l_reg = loss_reg(tangents, axis=0, normalizer=reg_norm)
    lambda_rc, lambda_sc, lambda_reg = lambdas
    total = ad.add(ad.add(ad.mul(l_rc, lambda_rc), ad.mul(l_sc, lambda_sc)), ad.mul(l_reg, lambda_reg))
    grads = tape.backward(total)
    return _ChunkResult(float(l_rc.value), float(l_sc.value), float(l_reg.value),
                        {name: grads[var] for name, var in params.items()})


def train_step(state: TrainState, config: TrainConfig,
               executor: Optional[ThreadPoolExecutor] = None) -> LossReport:
    """One optimizer step on a seeded random batch of camera rays"""
    start = time.perf_counter()
    iteration = state.iteration
    rng = batch_generator(config.seed, iteration)
    idx = select_rays(state, config, rng)
    num_patterns = len(state.patterns)

    directions = state.directions[idx]
    origins = np.broadcast_to(state.camera.center, directions.shape)
    field = state.field
    samples = sample_rays(field.sdf_normalized, origins, directions, state.bounds,
                          config.k_coarse, config.k_fine, state.net.s, config.weight_mode, rng)

    # surface-defined mask from an untaped pass, so every chunk shares the L_sc normalizer
    sdf = field.sdf_normalized(samples.points)
    weight_sum = np.asarray(compute_weights(sdf, state.net.s, samples.t, config.weight_mode)).sum(axis=-1)
    defined = weight_sum > SURFACE_EPS

    captured = state.captures.images.reshape(num_patterns, -1)[:, idx].T
    a = state.captures.a_map.ravel()[idx]
    b = state.captures.b_map.ravel()[idx]
    batch = idx.size
    scales = (batch * num_patterns, int(defined.sum()) * num_patterns, batch * samples.t.shape[1])
    lambda_sc = config.lambda_sc_at(iteration)
    lambdas = (config.weights.lambda_rc, lambda_sc, config.weights.lambda_reg)

    chunks = [slice(i, min(i + config.chunk_size, batch)) for i in range(0, batch, config.chunk_size)]

    def run(rays: slice) -> _ChunkResult:
        return _chunk_step(state, samples, rays, captured, a, b, defined, scales, lambdas,
                           config.weight_mode)

    if executor is not None and len(chunks) > 1:
        results = list(executor.map(run, chunks))
    else:
        results = [run(rays) for rays in chunks]

    # fixed chunk order keeps the reduction independent of scheduling
    l_rc = l_sc = l_reg = 0.0
    grads = {name: np.zeros_like(value) for name, value in state.net.params.items()}
    for result in results:
        l_rc += result.rc
        l_sc += result.sc
        l_reg += result.reg
        for name in grads:
            grads[name] = grads[name] + result.grads[name]
    total = lambdas[0] * l_rc + lambda_sc * l_sc + lambdas[2] * l_reg

    if not np.isfinite(total) or not all(np.all(np.isfinite(g)) for g in grads.values()):
        raise NumericalError(f"non-finite loss or gradient at iteration {iteration}", iteration)

    state.optimizer.update(state.net.params, grads)
    state.iteration += 1
    report = LossReport(l_rc=l_rc, l_sc=l_sc, l_reg=l_reg, total=total, iteration=iteration,
                        num_patterns=num_patterns, inv_s=state.net.inv_s,
                        wall_time=time.perf_counter() - start)
    state.history.append(report)
    logger.debug("iter %d N=%d rc=%.5f sc=%.5f reg=%.5f total=%.5f 1/s=%.4f", iteration,
                 num_patterns, l_rc, l_sc, l_reg, total, report.inv_s)
    return report


def add_pattern(state: TrainState, pattern: Pattern, image: np.ndarray) -> TrainState:
    """Grow the training set by one pattern/image pair without touching the network or optimizer"""
    image = np.asarray(image, dtype=np.float64)
    if pattern.grid.shape != tuple(state.patterns.resolution):
        raise ConfigError(
            f"pattern resolution {pattern.grid.shape} does not match {state.patterns.resolution}"
        )
    if image.shape != tuple(state.captures.resolution):
        raise ConfigError(f"image resolution {image.shape} does not match {state.captures.resolution}")
    images = np.concatenate([state.captures.images, image[None]], axis=0)
    a_map, b_map = estimate_ab(images)
    state.captures = CaptureSet(images=images, a_map=a_map, b_map=b_map,
                                noise_sigma=state.captures.noise_sigma)
    state.patterns = state.patterns.extend(PatternSet([pattern]))
    state._grids = state.patterns.grids.astype(np.float64)
    logger.info("added pattern %d at iteration %d", len(state.patterns), state.iteration)
    return state


class Trainer:
    """Runs train_step to a target iteration with logging, checkpoints and a progress bar"""

    def __init__(self, state: TrainState, config: TrainConfig, log_path: Optional[Path] = None,
                 checkpoint_dir: Optional[Path] = None, progress: bool = False):
        self.state = state
        self.config = config
        self.log_path = Path(log_path) if log_path else None
        self.checkpoint_dir = Path(checkpoint_dir) if checkpoint_dir else None
        self.progress = progress

    def _log_row(self, report: LossReport) -> None:
        if self.log_path is None:
            return
        new_file = not self.log_path.exists()
        with open(self.log_path, "a", newline="", encoding="utf-8") as f:
            writer = csv.writer(f)
            if new_file:
                writer.writerow(LOG_COLUMNS)
            writer.writerow([report.iteration, report.num_patterns, repr(report.l_rc),
                             repr(report.l_sc), repr(report.l_reg), repr(report.total),
                             repr(report.inv_s), f"{report.wall_time:.6f}"])

    def save_checkpoint(self, path: Optional[Path] = None) -> Path:
        from ..exporters.checkpoint import save_checkpoint

        if path is None:
            if self.checkpoint_dir is None:
                raise ConfigError("no checkpoint directory configured")
            path = self.checkpoint_dir / f"checkpoint_{self.state.iteration:06d}.slsdf"
        return save_checkpoint(path, self.state.net, self.state.box, self.state.optimizer,
                               self.state.iteration)

    def fit(self, until: Optional[int] = None,
            callback: Optional[Callable[[TrainState, LossReport], None]] = None) -> List[LossReport]:
        """Train until the state's iteration counter reaches `until` (default: config.iterations)"""
        until = self.config.iterations if until is None else until
        reports = []
        logger.info("training iterations %d..%d on %d patterns", self.state.iteration, until,
                    len(self.state.patterns))
        workers = self.config.workers
        executor = ThreadPoolExecutor(max_workers=workers) if workers > 1 else None
        try:
            bar = tqdm(total=max(until - self.state.iteration, 0), disable=not self.progress,
                       desc="train", unit="it")
            while self.state.iteration < until:
                report = train_step(self.state, self.config, executor)
                reports.append(report)
                self._log_row(report)
                if callback is not None:
                    callback(self.state, report)
                every = self.config.checkpoint_every
                if every and self.checkpoint_dir and self.state.iteration % every == 0:
                    self.save_checkpoint()
                bar.update(1)
                bar.set_postfix(loss=f"{report.total:.4f}", inv_s=f"{report.inv_s:.3f}")
            bar.close()
        finally:
            if executor is not None:
                executor.shutdown()
        if reports:
            logger.info("finished at iteration %d, total loss %.5f", self.state.iteration,
                        reports[-1].total)
        return reports
