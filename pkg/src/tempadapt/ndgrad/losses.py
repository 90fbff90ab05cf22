from __future__ import annotations

import numpy as np

from ..errors import ConfigError
from .tensor import ShapeError, Tensor, as_tensor, make_result

BCE_EPS = 1e-7


def huber_loss(pred: Tensor, target, delta: float = 1.0) -> Tensor:
    """Mean Huber loss; quadratic inside ``|e| <= delta``, linear outside."""
    if delta <= 0:
        raise ConfigError(f"huber delta must be > 0, got {delta}")
    pred, target = as_tensor(pred), as_tensor(target)
    if pred.shape != target.shape:
        raise ShapeError(f"huber_loss: pred shape {pred.shape} != target shape {target.shape}")
    e = pred.data - target.data
    a = np.abs(e)
    quad = a <= delta
    value = np.where(quad, 0.5 * e * e, delta * (a - 0.5 * delta)).mean()
    n = e.size

    def back(g):
        local = np.clip(e, -delta, delta) * (g / n)
        return local, -local

    return make_result(np.array(value), "huber", (pred, target), back)


def bce_loss(prob: Tensor, label) -> Tensor:
    """Mean binary cross-entropy on probabilities clamped to [1e-7, 1 - 1e-7]."""
    prob, label = as_tensor(prob), as_tensor(label)
    if prob.shape != label.shape:
        raise ShapeError(f"bce_loss: prob shape {prob.shape} != label shape {label.shape}")
    p = np.clip(prob.data, BCE_EPS, 1.0 - BCE_EPS)
    y = label.data
    value = -(y * np.log(p) + (1.0 - y) * np.log1p(-p)).mean()
    n = p.size

    def back(g):
        return (g / n) * (p - y) / (p * (1.0 - p)), None

    return make_result(np.array(value), "bce", (prob, label), back)
