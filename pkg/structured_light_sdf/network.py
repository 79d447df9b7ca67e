"""Neural signed distance field: positional encoding, softplus MLP with a skip, sharpness s"""

import logging
import math
from dataclasses import dataclass
from typing import Dict, List, Mapping, Optional, Tuple

import numpy as np

from . import autodiff as ad
from .errors import ConfigError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class EncodingConfig:
    """Frequency bands L and whether the raw coordinates lead the feature vector"""
    num_frequencies: int = 6
    include_input: bool = True

    def __post_init__(self):
        if self.num_frequencies < 0:
            raise ConfigError("num_frequencies must be non-negative")
        if not self.include_input and self.num_frequencies == 0:
            raise ConfigError("encoding would be empty")

    @property
    def output_dim(self) -> int:
        return 3 * int(self.include_input) + 6 * self.num_frequencies


def encode(x, cfg: EncodingConfig):
    """[x, sin(2^0 π x), cos(2^0 π x), ..., sin(2^(L-1) π x), cos(2^(L-1) π x)] per point.

    Accepts (P, 3) arrays or tape variables.
    """
    parts = [x] if cfg.include_input else []
    for k in range(cfg.num_frequencies):
        scaled = ad.mul(x, (2.0 ** k) * math.pi)
        parts.append(ad.sin(scaled))
        parts.append(ad.cos(scaled))
    return ad.concat(parts, axis=-1)


def encode_tangents(x: np.ndarray, cfg: EncodingConfig) -> np.ndarray:
    """Derivatives of the encoding along the three coordinate axes, shape (3, P, D)"""
    x = np.asarray(x, dtype=np.float64)
    count = x.shape[0]
    tangents = np.zeros((3, count, cfg.output_dim))
    offset = 0
    axes = np.arange(3)
    if cfg.include_input:
        tangents[axes, :, axes] = 1.0
        offset = 3
    for k in range(cfg.num_frequencies):
        freq = (2.0 ** k) * math.pi
        tangents[axes, :, offset + axes] = (freq * np.cos(freq * x)).T
        tangents[axes, :, offset + 3 + axes] = (-freq * np.sin(freq * x)).T
        offset += 6
    return tangents


@dataclass(frozen=True)
class SceneBox:
    """Isotropic working volume: normalized = (world - center) / half_extent"""
    center: Tuple[float, float, float] = (0.0, 0.0, 0.75)
    half_extent: float = 0.3

    def __post_init__(self):
        if not self.half_extent > 0 or not math.isfinite(self.half_extent):
            raise ConfigError(f"scene box needs a positive extent, got {self.half_extent}")

    @property
    def center_array(self) -> np.ndarray:
        return np.asarray(self.center, dtype=np.float64)


def normalize_scene(points, box: SceneBox) -> np.ndarray:
    return (np.asarray(points, dtype=np.float64) - box.center_array) / box.half_extent


def denormalize_scene(points, box: SceneBox) -> np.ndarray:
    return np.asarray(points, dtype=np.float64) * box.half_extent + box.center_array


class SdfNetwork:
    """MLP f: normalized point -> signed distance (normalized units).

    Layer l maps dims[l] -> dims[l+1]; at the skip layer the encoded input is
    concatenated back and the sum scaled by 1/sqrt(2). Weights are stored (in, out).
    """

    def __init__(self, hidden_layers: int = 4, hidden_width: int = 64,
                 skip_layer: Optional[int] = 2, encoding: EncodingConfig = EncodingConfig(),
                 softplus_beta: float = 100.0):
        if hidden_layers < 1 or hidden_width < 1:
            raise ConfigError("network needs at least one hidden layer of positive width")
        if skip_layer is not None and not 1 <= skip_layer <= hidden_layers:
            raise ConfigError(f"skip_layer must be in [1, {hidden_layers}] or null")
        if skip_layer is not None and hidden_width <= encoding.output_dim:
            raise ConfigError(
                f"hidden_width {hidden_width} must exceed the encoding size "
                f"{encoding.output_dim} to host the skip connection"
            )
        self.hidden_layers = hidden_layers
        self.hidden_width = hidden_width
        self.skip_layer = skip_layer
        self.encoding = encoding
        self.softplus_beta = float(softplus_beta)
        self.params: Dict[str, np.ndarray] = {}
        for l, (d_in, d_out) in enumerate(self.layer_shapes()):
            self.params[f"layer{l}.weight"] = np.zeros((d_in, d_out))
            self.params[f"layer{l}.bias"] = np.zeros(d_out)
        self.params["log_s"] = np.array(math.log(1.0 / 0.3))

    def layer_shapes(self) -> List[Tuple[int, int]]:
        enc_dim = self.encoding.output_dim
        dims = [enc_dim] + [self.hidden_width] * self.hidden_layers + [1]
        shapes = []
        for l in range(len(dims) - 1):
            d_in, d_out = dims[l], dims[l + 1]
            if self.skip_layer is not None and l + 1 == self.skip_layer:
                d_out -= enc_dim
            shapes.append((d_in, d_out))
        return shapes

    def multiply_adds(self) -> int:
        """Multiply-adds of one forward pass per point, encoding excluded"""
        return sum(d_in * d_out for d_in, d_out in self.layer_shapes())

    @property
    def num_layers(self) -> int:
        return self.hidden_layers + 1

    @property
    def s(self) -> float:
        return float(np.exp(self.params["log_s"]))

    @property
    def inv_s(self) -> float:
        return 1.0 / self.s

    def parameter_count(self) -> int:
        return int(sum(p.size for p in self.params.values()))

    def get_flat(self) -> np.ndarray:
        """Parameters concatenated in layer order, log s last"""
        return np.concatenate([p.ravel() for p in self.params.values()])

    def set_flat(self, flat: np.ndarray) -> None:
        flat = np.asarray(flat, dtype=np.float64)
        if flat.size != self.parameter_count():
            raise ConfigError(f"expected {self.parameter_count()} parameters, got {flat.size}")
        offset = 0
        for name, value in self.params.items():
            self.params[name] = flat[offset:offset + value.size].reshape(value.shape).copy()
            offset += value.size

    def architecture(self) -> dict:
        return {
            "hidden_layers": self.hidden_layers,
            "hidden_width": self.hidden_width,
            "skip_layer": self.skip_layer,
            "num_frequencies": self.encoding.num_frequencies,
            "include_input": self.encoding.include_input,
            "softplus_beta": self.softplus_beta,
        }

    @classmethod
    def from_architecture(cls, arch: Mapping) -> "SdfNetwork":
        return cls(
            hidden_layers=int(arch["hidden_layers"]),
            hidden_width=int(arch["hidden_width"]),
            skip_layer=None if arch.get("skip_layer") is None else int(arch["skip_layer"]),
            encoding=EncodingConfig(int(arch["num_frequencies"]), bool(arch["include_input"])),
            softplus_beta=float(arch.get("softplus_beta", 100.0)),
        )

    def forward(self, x, params: Optional[Mapping] = None):
        """Signed distance (P,) for normalized points (P, 3)"""
        sdf, _ = self._run(x, params, with_tangents=False)
        return sdf

    def forward_with_gradient(self, x: np.ndarray, params: Optional[Mapping] = None):
        """Signed distance (P,) and its spatial gradient, stored axis-first as (3, P).

        The gradient is carried forward as three directional derivatives, so on a
        tape it stays differentiable with respect to the parameters.
        """
        return self._run(x, params, with_tangents=True)

    def gradient(self, x: np.ndarray) -> np.ndarray:
        """Spatial gradient (P, 3) with the current parameters"""
        _, tangents = self.forward_with_gradient(x)
        return np.moveaxis(np.asarray(tangents), 0, -1)

    def _run(self, x, params: Optional[Mapping], with_tangents: bool):
        params = self.params if params is None else params
        enc = encode(x, self.encoding)
        enc_t = encode_tangents(ad.value(x), self.encoding) if with_tangents else None
        h, h_t = enc, enc_t
        for l in range(self.num_layers):
            if self.skip_layer is not None and l == self.skip_layer:
                h = ad.mul(ad.concat([h, enc], axis=-1), 1.0 / math.sqrt(2.0))
                if with_tangents:
                    h_t = ad.mul(ad.concat([h_t, enc_t], axis=-1), 1.0 / math.sqrt(2.0))
            weight = params[f"layer{l}.weight"]
            z = ad.add(ad.matmul(h, weight), params[f"layer{l}.bias"])
            if with_tangents:
                h_t = ad.matmul(h_t, weight)
            if l < self.num_layers - 1:
                h = ad.softplus(z, self.softplus_beta)
                if with_tangents:
                    h_t = ad.mul(h_t, ad.sigmoid(ad.mul(z, self.softplus_beta)))
            else:
                h = z
        sdf = ad.reshape(h, (-1,))
        if not with_tangents:
            return sdf, None
        return sdf, ad.reshape(h_t, (3, -1))


def init_geometric(net: SdfNetwork, radius: float = 0.5, seed: int = 0,
                   inv_s: float = 0.3) -> SdfNetwork:
    """Initialize so that f(x) ≈ |x| - radius, with 1/s = inv_s.

    Frequency-band inputs start with zero weights so the initial field is smooth.
    """
    if not net.encoding.include_input:
        raise ConfigError("geometric initialization needs the raw coordinates in the encoding")
    rng = np.random.default_rng(seed)
    enc_dim = net.encoding.output_dim
    last = net.num_layers - 1
    for l, (d_in, d_out) in enumerate(net.layer_shapes()):
        if l == last:
            weight = rng.normal(math.sqrt(math.pi) / math.sqrt(d_in), 1e-4, size=(d_in, d_out))
            bias = np.full(d_out, -radius)
        else:
            weight = rng.normal(0.0, math.sqrt(2.0) / math.sqrt(d_out), size=(d_in, d_out))
            if l == 0:
                weight[3:, :] = 0.0
            elif net.skip_layer is not None and l == net.skip_layer:
                weight[d_in - (enc_dim - 3):, :] = 0.0
            bias = np.zeros(d_out)
        net.params[f"layer{l}.weight"] = weight
        net.params[f"layer{l}.bias"] = bias
    net.params["log_s"] = np.array(math.log(1.0 / inv_s))
    logger.debug("geometric init: radius=%s seed=%s params=%d", radius, seed, net.parameter_count())
    return net


class NeuralField:
    """A network bound to its scene box, evaluated on world-space points"""

    def __init__(self, net: SdfNetwork, box: SceneBox):
        self.net = net
        self.box = box

    def sdf_normalized(self, world_points: np.ndarray) -> np.ndarray:
        points = np.asarray(world_points, dtype=np.float64)
        flat = normalize_scene(points.reshape(-1, 3), self.box)
        return np.asarray(self.net.forward(flat)).reshape(points.shape[:-1])

    def sdf(self, world_points: np.ndarray) -> np.ndarray:
        """Signed distance in metres"""
        return self.sdf_normalized(world_points) * self.box.half_extent
