"""Adaptive moment estimation over named numpy parameters"""

from typing import Dict, Mapping

import numpy as np

from ..errors import ConfigError


class Adam:
    """Bias-corrected first/second moment optimizer; updates parameters in place"""

    def __init__(self, learning_rate: float = 5e-4, beta1: float = 0.9, beta2: float = 0.999,
                 eps: float = 1e-8):
        if learning_rate < 0 or not 0 <= beta1 < 1 or not 0 <= beta2 < 1 or eps <= 0:
            raise ConfigError("invalid optimizer settings")
        self.learning_rate = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.step_count = 0
        self.m: Dict[str, np.ndarray] = {}
        self.v: Dict[str, np.ndarray] = {}

    def update(self, params: Dict[str, np.ndarray], grads: Mapping[str, np.ndarray]) -> None:
        self.step_count += 1
        correction1 = 1.0 - self.beta1 ** self.step_count
        correction2 = 1.0 - self.beta2 ** self.step_count
        for name, value in params.items():
            grad = np.asarray(grads[name], dtype=np.float64)
            m = self.m.get(name, np.zeros_like(value))
            v = self.v.get(name, np.zeros_like(value))
            m = self.beta1 * m + (1.0 - self.beta1) * grad
            v = self.beta2 * v + (1.0 - self.beta2) * grad * grad
            self.m[name], self.v[name] = m, v
            step = (m / correction1) / (np.sqrt(v / correction2) + self.eps)
            params[name] = value - self.learning_rate * step

    def state_dict(self) -> dict:
        return {"step_count": self.step_count, "m": dict(self.m), "v": dict(self.v)}

    def load_state_dict(self, state: Mapping) -> None:
        self.step_count = int(state["step_count"])
        self.m = {k: np.array(v, dtype=np.float64) for k, v in state["m"].items()}
        self.v = {k: np.array(v, dtype=np.float64) for k, v in state["v"].items()}
