"""Differentiable operations on :class:`Tensor`.

Each op computes its forward value with numpy and records a closure that maps
the upstream gradient to one gradient per input.
"""

from __future__ import annotations

import numpy as np

from .. import _kernels
from .tensor import ShapeError, Tensor, as_tensor, make_result


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    if grad.shape == shape:
        return grad
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, dim in enumerate(shape):
        if dim == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def _check_broadcast(op: str, a: Tensor, b: Tensor) -> tuple[int, ...]:
    try:
        return np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ShapeError(f"{op}: cannot broadcast shapes {a.shape} and {b.shape}") from None


def matmul(a: Tensor, b: Tensor) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul: inner dimensions differ for shapes {a.shape} and {b.shape}")

    def back(g):
        return g @ b.data.T, a.data.T @ g

    return make_result(a.data @ b.data, "matmul", (a, b), back)


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast("add", a, b)

    def back(g):
        return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)

    return make_result(a.data + b.data, "add", (a, b), back)


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast("sub", a, b)

    def back(g):
        return _unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)

    return make_result(a.data - b.data, "sub", (a, b), back)


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast("mul", a, b)

    def back(g):
        return _unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)

    return make_result(a.data * b.data, "mul", (a, b), back)


def scale(x: Tensor, c: float) -> Tensor:
    c = float(c)
    return make_result(x.data * c, "scale", (x,), lambda g: (g * c,))


def sigmoid(x: Tensor) -> Tensor:
    x = as_tensor(x)
    out = 0.5 * (1.0 + np.tanh(0.5 * x.data))  # overflow-free logistic
    return make_result(out, "sigmoid", (x,), lambda g: (g * out * (1.0 - out),))


def tanh(x: Tensor) -> Tensor:
    x = as_tensor(x)
    out = np.tanh(x.data)
    return make_result(out, "tanh", (x,), lambda g: (g * (1.0 - out * out),))


_ACTIVATIONS = {"sigmoid", "tanh", "elementwise-add", "elementwise-mul"}


def activation(x: Tensor, kind: str, other: Tensor | None = None) -> Tensor:
    """Dispatch by name; the binary kinds need ``other``."""
    if kind == "sigmoid":
        return sigmoid(x)
    if kind == "tanh":
        return tanh(x)
    if kind in ("elementwise-add", "elementwise-mul"):
        if other is None:
            raise ValueError(f"{kind} needs a second operand")
        return add(x, other) if kind == "elementwise-add" else mul(x, other)
    raise ValueError(f"unknown activation {kind!r}; expected one of {sorted(_ACTIVATIONS)}")


def sum(x: Tensor, axis: int | None = None, keepdims: bool = False) -> Tensor:  # noqa: A001
    x = as_tensor(x)
    out = x.data.sum(axis=axis, keepdims=keepdims)

    def back(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, x.shape).copy(),)

    return make_result(np.asarray(out, dtype=np.float64), "sum", (x,), back)


def mean(x: Tensor, axis: int | None = None, keepdims: bool = False) -> Tensor:
    n = x.size if axis is None else x.shape[axis]
    return scale(sum(x, axis=axis, keepdims=keepdims), 1.0 / n)


def cumsum(x: Tensor, axis: int = -1) -> Tensor:
    x = as_tensor(x)

    def back(g):
        return (np.flip(np.cumsum(np.flip(g, axis=axis), axis=axis), axis=axis),)

    return make_result(np.cumsum(x.data, axis=axis), "cumsum", (x,), back)


def reshape(x: Tensor, shape: tuple[int, ...]) -> Tensor:
    x = as_tensor(x)
    return make_result(x.data.reshape(shape), "reshape", (x,), lambda g: (g.reshape(x.shape),))


def index(x: Tensor, idx) -> Tensor:
    x = as_tensor(x)

    def back(g):
        full = np.zeros_like(x.data)
        np.add.at(full, idx, g)
        return (full,)

    return make_result(np.array(x.data[idx], dtype=np.float64), "index", (x,), back)


def concat(tensors: list[Tensor], axis: int = 0) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    sizes = [t.shape[axis] for t in tensors]
    splits = np.cumsum(sizes)[:-1]

    def back(g):
        return tuple(np.split(g, splits, axis=axis))

    return make_result(np.concatenate([t.data for t in tensors], axis=axis), "concat", tensors, back)


def grad_reverse(x: Tensor, lambda_adv: float) -> Tensor:
    """Identity forward; the backward pass hands ``-lambda_adv * g`` to ``x``."""
    if lambda_adv < 0:
        raise ValueError(f"lambda_adv must be >= 0, got {lambda_adv}")
    lam = float(lambda_adv)
    x = as_tensor(x)
    return make_result(x.data, "grad_reverse", (x,), lambda g: (g * -lam,))


def linear(x: Tensor, w: Tensor, b: Tensor) -> Tensor:
    return add(matmul(x, w), b)


def lstm(x_seq: Tensor, w_x: Tensor, w_h: Tensor, b: Tensor) -> Tensor:
    """Unroll a single-layer LSTM from zero state and return the final hidden state.

    ``x_seq`` is (batch, steps, features); gate columns in the weights are
    ordered input, forget, cell, output. The per-step gate math runs in the
    compiled kernel when it is available.
    """
    x_seq, w_x, w_h, b = (as_tensor(t) for t in (x_seq, w_x, w_h, b))
    if x_seq.ndim != 3:
        raise ShapeError(f"lstm: expected (batch, steps, features) input, got {x_seq.shape}")
    n, steps, f = x_seq.shape
    hid = w_h.shape[0]
    if w_x.shape != (f, 4 * hid) or w_h.shape != (hid, 4 * hid) or b.shape != (4 * hid,):
        raise ShapeError(
            f"lstm: weight shapes {w_x.shape}, {w_h.shape}, {b.shape} do not fit "
            f"input features {f} and hidden size {hid}"
        )
    wx, wh = w_x.data, w_h.data
    # time-major copy so each step's slice is contiguous; input projection for all steps in one GEMM
    xt = np.ascontiguousarray(x_seq.data.transpose(1, 0, 2)).reshape(steps * n, f)
    zs = (xt @ wx + b.data).reshape(steps, n, 4 * hid)
    hs = np.zeros((steps + 1, n, hid))
    c = np.zeros((n, hid))
    cache = []
    for t in range(steps):
        z = zs[t]
        z += hs[t] @ wh
        hs[t + 1], c_new, acts, tanh_c = _kernels.cell_forward(z, c)
        cache.append((c, acts, tanh_c))
        c = c_new
    h = hs[steps].copy()

    def back(g):
        dz_all = np.empty((steps, n, 4 * hid))
        dh = np.ascontiguousarray(g)
        dc = np.zeros((n, hid))
        for t in range(steps - 1, -1, -1):
            c_prev, acts, tanh_c = cache[t]
            dz, dc = _kernels.cell_backward(dh, dc, acts, c_prev, tanh_c)
            dz_all[t] = dz
            dh = dz @ wh.T
        dz_flat = dz_all.reshape(steps * n, 4 * hid)
        dwx = xt.T @ dz_flat
        dwh = hs[:steps].reshape(steps * n, hid).T @ dz_flat
        db = dz_flat.sum(axis=0)
        dx = None
        if x_seq.requires_grad:
            dx = (dz_flat @ wx.T).reshape(steps, n, f).transpose(1, 0, 2)
        return dx, dwx, dwh, db

    return make_result(h, "lstm", (x_seq, w_x, w_h, b), back)
