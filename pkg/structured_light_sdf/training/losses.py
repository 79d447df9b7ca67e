"""Rendered-colour, surface-colour and Eikonal losses.

Each loss accepts plain arrays or tape variables. `normalizer` overrides the
element count so that ray chunks processed on separate tapes sum to the loss of
the whole batch.
"""

from typing import Optional

import numpy as np

from .. import autodiff as ad
from ..errors import ShapeError

GRAD_NORM_EPS = 1e-12


def _check_pair(estimate, captured) -> None:
    shape_a, shape_b = np.shape(ad.value(estimate)), np.shape(captured)
    if shape_a != shape_b:
        raise ShapeError(f"loss operands differ in shape: {shape_a} vs {shape_b}")


def _mean_abs(estimate, captured, mask: Optional[np.ndarray], normalizer: Optional[float]):
    _check_pair(estimate, captured)
    residual = ad.abs_(ad.sub(estimate, np.asarray(captured, dtype=np.float64)))
    count = np.size(captured)
    if mask is not None:
        mask = np.asarray(mask, dtype=bool)
        residual = ad.where(mask[:, None], residual, 0.0)
        count = int(mask.sum()) * np.shape(captured)[1]
    if normalizer is not None:
        count = normalizer
    if count == 0:
        return ad.mul(ad.sum_(residual), 0.0)
    return ad.mul(ad.sum_(residual), 1.0 / count)


def loss_rc(rendered, captured, normalizer: Optional[float] = None):
    """Mean |I - I'| over rays and patterns"""
    return _mean_abs(rendered, captured, None, normalizer)


def loss_sc(surface_rendered, captured, mask: Optional[np.ndarray] = None,
            normalizer: Optional[float] = None):
    """Mean |I - Î| over rays with a defined expected surface, and patterns"""
    return _mean_abs(surface_rendered, captured, mask, normalizer)


def loss_reg(gradients, axis: int = -1, normalizer: Optional[float] = None):
    """Mean (|∇f| - 1)^2 over all samples; `axis` holds the three components"""
    norm = ad.sqrt(ad.add(ad.sum_(ad.square(gradients), axis=axis), GRAD_NORM_EPS))
    penalty = ad.square(ad.sub(norm, 1.0))
    count = np.size(ad.value(penalty)) if normalizer is None else normalizer
    return ad.mul(ad.sum_(penalty), 1.0 / count)
