"""Minimal reverse-mode autodiff over float64 numpy arrays."""

from .losses import ConfigError, bce_loss, huber_loss
from .ops import (
    activation,
    add,
    concat,
    cumsum,
    grad_reverse,
    index,
    linear,
    lstm,
    matmul,
    mean,
    mul,
    reshape,
    scale,
    sigmoid,
    sub,
    tanh,
)
from .ops import sum as tsum
from .optim import Adam, AdamState, adam_step
from .tensor import ShapeError, Tape, Tensor, UsageError, backward, build_tape

__all__ = [
    "Adam",
    "AdamState",
    "ConfigError",
    "ShapeError",
    "Tape",
    "Tensor",
    "UsageError",
    "activation",
    "adam_step",
    "add",
    "backward",
    "bce_loss",
    "build_tape",
    "concat",
    "cumsum",
    "grad_reverse",
    "huber_loss",
    "index",
    "linear",
    "lstm",
    "matmul",
    "mean",
    "mul",
    "reshape",
    "scale",
    "sigmoid",
    "sub",
    "tanh",
    "tsum",
]
