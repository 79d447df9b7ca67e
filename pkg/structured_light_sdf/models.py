"""Data models for rigs, patterns, captures, depth maps and training"""

from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from .errors import ConfigError, DomainError

ORTHONORMAL_TOL = 1e-9


class PatternKind(Enum):
    """Kinds of projector patterns"""
    RANDOM_BINARY = "random-binary"
    GRAY_CODE = "gray-code"
    GRAY_CODE_INVERSE = "gray-code-inverse"
    PHASE_SHIFT = "phase-shift"


class DepthSource(Enum):
    """Where a depth map came from"""
    NEURAL = "neural"
    GRAY_CODE = "gray-code"
    PHASE_GT = "phase-gt"
    SIMULATOR = "simulator"


class WeightMode(Enum):
    """Discretization of the rendering weights along a ray"""
    EQ3 = "eq3"
    ALPHA = "alpha"


@dataclass(frozen=True)
class Intrinsics:
    """Pinhole intrinsics in pixels"""
    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self):
        if self.fx <= 0 or self.fy <= 0:
            raise DomainError(f"focal lengths must be positive, got fx={self.fx}, fy={self.fy}")
        if self.width < 1 or self.height < 1:
            raise DomainError(f"resolution must be positive, got {self.width}x{self.height}")
        if not (0 <= self.cx < self.width and 0 <= self.cy < self.height):
            raise DomainError(
                f"principal point ({self.cx}, {self.cy}) outside {self.width}x{self.height}"
            )

    @property
    def matrix(self) -> np.ndarray:
        return np.array([
            [self.fx, 0.0, self.cx],
            [0.0, self.fy, self.cy],
            [0.0, 0.0, 1.0],
        ])

    @property
    def resolution(self) -> Tuple[int, int]:
        """(height, width), the numpy shape of an image from this device"""
        return (self.height, self.width)


@dataclass(frozen=True)
class DeviceModel:
    """A calibrated camera or projector: intrinsics plus world-to-device pose"""
    intrinsics: Intrinsics
    rotation: np.ndarray = field(default_factory=lambda: np.eye(3))
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        rotation = np.asarray(self.rotation, dtype=np.float64).reshape(3, 3)
        translation = np.asarray(self.translation, dtype=np.float64).reshape(3)
        if np.max(np.abs(rotation.T @ rotation - np.eye(3))) > ORTHONORMAL_TOL:
            raise DomainError("device rotation is not orthonormal")
        if abs(np.linalg.det(rotation) - 1.0) > ORTHONORMAL_TOL:
            raise DomainError("device rotation must have determinant +1")
        object.__setattr__(self, "rotation", rotation)
        object.__setattr__(self, "translation", translation)

    @property
    def center(self) -> np.ndarray:
        """Optical center in world coordinates"""
        return -self.rotation.T @ self.translation

    def to_device(self, points: np.ndarray) -> np.ndarray:
        """World points (..., 3) into the device frame"""
        return points @ self.rotation.T + self.translation


@dataclass(frozen=True)
class Ray:
    """A ray with unit direction and positive distance bounds"""
    origin: np.ndarray
    direction: np.ndarray
    t_near: float
    t_far: float

    def __post_init__(self):
        if not (0 < self.t_near < self.t_far):
            raise DomainError(f"invalid ray bounds ({self.t_near}, {self.t_far})")
        if abs(np.linalg.norm(self.direction) - 1.0) > 1e-12:
            raise DomainError("ray direction must be a unit vector")

    def at(self, t) -> np.ndarray:
        return self.origin + np.multiply.outer(t, self.direction)


@dataclass
class Pattern:
    """One projector intensity grid in [0, 1]"""
    grid: np.ndarray  # (height, width) float32
    kind: PatternKind
    meta: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        self.grid = np.array(self.grid, dtype=np.float32)
        if self.grid.ndim != 2:
            raise DomainError("pattern grid must be two dimensional")
        if self.grid.size and (self.grid.min() < 0.0 or self.grid.max() > 1.0):
            raise DomainError("pattern values must lie in [0, 1]")

    @property
    def resolution(self) -> Tuple[int, int]:
        return self.grid.shape


@dataclass
class PatternSet:
    """Ordered projector patterns sharing one resolution"""
    patterns: List[Pattern] = field(default_factory=list)
    rng_seed: Optional[int] = None

    def __post_init__(self):
        shapes = {p.grid.shape for p in self.patterns}
        if len(shapes) > 1:
            raise ConfigError(f"patterns in a set must share one resolution, got {sorted(shapes)}")

    def __len__(self) -> int:
        return len(self.patterns)

    def __iter__(self):
        return iter(self.patterns)

    def __getitem__(self, index):
        return self.patterns[index]

    @property
    def resolution(self) -> Tuple[int, int]:
        if not self.patterns:
            raise ConfigError("empty pattern set has no resolution")
        return self.patterns[0].grid.shape

    @property
    def grids(self) -> np.ndarray:
        """Stacked grids, shape (N, height, width)"""
        return np.stack([p.grid for p in self.patterns]).astype(np.float32)

    def subset(self, count: int) -> "PatternSet":
        """The first `count` patterns in projection order"""
        return PatternSet(patterns=list(self.patterns[:count]), rng_seed=self.rng_seed)

    def extend(self, other: "PatternSet") -> "PatternSet":
        return PatternSet(patterns=list(self.patterns) + list(other.patterns), rng_seed=self.rng_seed)


@dataclass
class CaptureSet:
    """Camera images plus the per-pixel background level a and fringe contrast b"""
    images: np.ndarray  # (N, height, width) float64 in [0, 1]
    a_map: np.ndarray
    b_map: np.ndarray
    noise_sigma: float = 0.0

    def __len__(self) -> int:
        return self.images.shape[0]

    @property
    def resolution(self) -> Tuple[int, int]:
        return self.images.shape[1:]

    def subset(self, count: int) -> "CaptureSet":
        """First `count` images with a/b re-estimated from them"""
        images = self.images[:count]
        a_map = images.min(axis=0)
        return CaptureSet(images=images, a_map=a_map, b_map=images.max(axis=0) - a_map,
                          noise_sigma=self.noise_sigma)


@dataclass
class DepthMap:
    """Camera-frame z depth per pixel in metres; invalid pixels hold NaN"""
    depth: np.ndarray
    valid: np.ndarray
    source: DepthSource
    t_near: float = 0.5
    t_far: float = 1.0

    def __post_init__(self):
        self.depth = np.asarray(self.depth, dtype=np.float64)
        self.valid = np.asarray(self.valid, dtype=bool) & np.isfinite(self.depth)
        self.depth = np.where(self.valid, self.depth, np.nan)

    @property
    def resolution(self) -> Tuple[int, int]:
        return self.depth.shape

    @classmethod
    def invalid(cls, resolution: Tuple[int, int], source: DepthSource,
                t_near: float = 0.5, t_far: float = 1.0) -> "DepthMap":
        return cls(np.full(resolution, np.nan), np.zeros(resolution, dtype=bool), source,
                   t_near, t_far)


@dataclass
class Correspondence:
    """Per camera pixel projector column (sub-pixel) with a decoding margin"""
    column: np.ndarray  # (height, width) float64, NaN where invalid
    valid: np.ndarray
    confidence: np.ndarray

    def __post_init__(self):
        self.valid = np.asarray(self.valid, dtype=bool) & np.isfinite(self.column)
        self.column = np.where(self.valid, self.column, np.nan)


@dataclass
class LossWeights:
    """Weights of the loss terms; lambda_rc is 1 except in ablation variants"""
    lambda_sc: float = 1.0
    lambda_reg: float = 0.1
    lambda_rc: float = 1.0

    def __post_init__(self):
        if min(self.lambda_sc, self.lambda_reg, self.lambda_rc) < 0:
            raise ConfigError("loss weights must be non-negative")


@dataclass
class TrainConfig:
    """Optimization settings for one training run"""
    batch_size: int = 512
    iterations: int = 1000
    phase1_iterations: int = 250
    learning_rate: float = 5e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    k_coarse: int = 32
    k_fine: int = 16
    weight_mode: WeightMode = WeightMode.EQ3
    weights: LossWeights = field(default_factory=LossWeights)
    b_floor: float = 0.02
    chunk_size: int = 128
    workers: int = 1
    seed: int = 0
    checkpoint_every: int = 0

    def __post_init__(self):
        if isinstance(self.weight_mode, str):
            self.weight_mode = WeightMode(self.weight_mode)
        if self.batch_size < 1:
            raise ConfigError("batch_size must be at least 1")
        if self.phase1_iterations > self.iterations:
            raise ConfigError("phase1_iterations cannot exceed iterations")
        if self.k_coarse < 2 or self.k_fine < 0:
            raise ConfigError("need k_coarse >= 2 and k_fine >= 0")
        if self.chunk_size < 1 or self.workers < 1:
            raise ConfigError("chunk_size and workers must be at least 1")

    def lambda_sc_at(self, iteration: int) -> float:
        """Surface colour weight under the two-phase schedule"""
        return 0.0 if iteration < self.phase1_iterations else self.weights.lambda_sc


@dataclass
class LossReport:
    """Loss terms of one optimizer step"""
    l_rc: float
    l_sc: float
    l_reg: float
    total: float
    iteration: int
    num_patterns: int
    inv_s: float = 0.0
    wall_time: float = 0.0


@dataclass
class RaySamples:
    """Sorted sample distances and world points for a batch of rays"""
    t: np.ndarray  # (R, K)
    points: np.ndarray  # (R, K, 3)
    origins: np.ndarray  # (R, 3)
    directions: np.ndarray  # (R, 3)
    sdf: Optional[np.ndarray] = None  # (R, K) when evaluated without a tape


@dataclass
class RenderOutput:
    """Weights and rendered intensities for a batch of rays"""
    weights: Any  # (R, K), Var on a tape during training
    rendered: Any  # (R, N) I'_i
    surface: Any  # (R, 3) expected surface points
    surface_defined: np.ndarray  # (R,)
    surface_rendered: Any  # (R, N) Î_i
    weight_sum: Any  # (R,)


@dataclass(frozen=True)
class Rig:
    """A calibrated camera/projector pair"""
    camera: DeviceModel
    projector: DeviceModel

    @property
    def baseline(self) -> float:
        return float(np.linalg.norm(self.projector.center - self.camera.center))
