"""Numpy implementation of the LSTM cell kernels.

Mirrors ``_lstm_cell.pyx`` exactly in contract. Gate layout along the last
axis of ``z`` and ``acts`` is [input, forget, cell, output].
"""

import numpy as np


def _sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def cell_forward(z, c_prev):
    hid = c_prev.shape[1]
    acts = np.empty_like(z)
    acts[:, : 2 * hid] = _sigmoid(z[:, : 2 * hid])
    acts[:, 2 * hid : 3 * hid] = np.tanh(z[:, 2 * hid : 3 * hid])
    acts[:, 3 * hid :] = _sigmoid(z[:, 3 * hid :])
    i = acts[:, :hid]
    f = acts[:, hid : 2 * hid]
    g = acts[:, 2 * hid : 3 * hid]
    o = acts[:, 3 * hid :]
    c = f * c_prev + i * g
    tanh_c = np.tanh(c)
    return o * tanh_c, c, acts, tanh_c


def cell_backward(dh, dc_next, acts, c_prev, tanh_c):
    hid = c_prev.shape[1]
    i = acts[:, :hid]
    f = acts[:, hid : 2 * hid]
    g = acts[:, 2 * hid : 3 * hid]
    o = acts[:, 3 * hid :]
    dc = dc_next + dh * o * (1.0 - tanh_c * tanh_c)
    dz = np.empty_like(acts)
    dz[:, :hid] = dc * g * i * (1.0 - i)
    dz[:, hid : 2 * hid] = dc * c_prev * f * (1.0 - f)
    dz[:, 2 * hid : 3 * hid] = dc * i * (1.0 - g * g)
    dz[:, 3 * hid :] = dh * tanh_c * o * (1.0 - o)
    return dz, dc * f
