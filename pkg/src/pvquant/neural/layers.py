"""Dense and LSTM building blocks with hand-written reverse passes.

Weights are stored input-major: a dense layer maps ``x @ W + b`` with ``W``
of shape ``(n_in, n_out)``. LSTM gate pre-activations are laid out as
``[input, forget, candidate, output]`` blocks of ``units`` columns each.
"""
from __future__ import annotations

import numpy as np

from ..errors import ShapeMismatch

ACTIVATIONS = ("relu", "identity")


def sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def _activate(z, activation):
    if activation == "relu":
        return np.maximum(z, 0.0)
    if activation == "identity":
        return z
    raise ValueError(f"unknown activation {activation!r}")


def dense_forward(W, b, x, activation="identity"):
    """Affine map followed by the activation."""
    W, b, x = np.asarray(W), np.asarray(b), np.asarray(x)
    if x.shape[-1] != W.shape[0] or b.shape != (W.shape[1],):
        raise ShapeMismatch(f"dense layer {W.shape} + bias {b.shape} cannot take input {x.shape}")
    return _activate(x @ W + b, activation)


def dense_forward_cached(W, b, x, activation="identity"):
    z = x @ W + b
    return _activate(z, activation), (x, z)


def dense_backward(W, cache, dout, activation="identity"):
    """Returns ``(dx, dW, db)`` for a batch ``x`` of shape (B, n_in)."""
    x, z = cache
    dz = dout * (z > 0) if activation == "relu" else dout
    return dz @ W.T, x.T @ dz, dz.sum(axis=0)


def lstm_step(cell_params, x_t, h_prev, c_prev):
    """Single LSTM update.

    ``cell_params`` is ``(Wx, Wh, b)`` with shapes ``(n_in, 4U)``, ``(U, 4U)``
    and ``(4U,)``. Returns ``(h_t, c_t)``.
    """
    Wx, Wh, b = (np.asarray(p) for p in cell_params)
    units = Wh.shape[0]
    x_t, h_prev, c_prev = np.asarray(x_t), np.asarray(h_prev), np.asarray(c_prev)
    if (
        Wh.shape != (units, 4 * units)
        or Wx.shape[1] != 4 * units
        or b.shape != (4 * units,)
        or x_t.shape[-1] != Wx.shape[0]
        or h_prev.shape[-1] != units
        or c_prev.shape != h_prev.shape
    ):
        raise ShapeMismatch("LSTM parameter and state shapes disagree")
    z = x_t @ Wx + h_prev @ Wh + b
    i = sigmoid(z[..., :units])
    f = sigmoid(z[..., units : 2 * units])
    g = np.tanh(z[..., 2 * units : 3 * units])
    o = sigmoid(z[..., 3 * units :])
    c_t = f * c_prev + i * g
    return o * np.tanh(c_t), c_t


def lstm_forward(Wx, Wh, b, xs, h0=None, c0=None):
    """Run an LSTM over ``xs`` of shape (B, S, n_in).

    Returns ``(hs, (h_S, c_S), cache)`` where ``hs`` stacks every hidden state.
    """
    B, S, n_in = xs.shape
    U = Wh.shape[0]
    if Wx.shape != (n_in, 4 * U):
        raise ShapeMismatch(f"LSTM input weights {Wx.shape} cannot take inputs of width {n_in}")
    dtype = Wh.dtype
    h = np.zeros((B, U), dtype) if h0 is None else h0
    c = np.zeros((B, U), dtype) if c0 is None else c0
    xw = (xs.reshape(B * S, n_in) @ Wx).reshape(B, S, 4 * U) + b
    hs = np.empty((B, S, U), dtype)
    cs = np.empty((B, S, U), dtype)
    acts = np.empty((B, S, 4 * U), dtype)
    tcs = np.empty((B, S, U), dtype)
    h_init, c_init = h, c
    for t in range(S):
        z = xw[:, t] + h @ Wh
        a = acts[:, t]
        a[:, : 2 * U] = sigmoid(z[:, : 2 * U])
        a[:, 2 * U : 3 * U] = np.tanh(z[:, 2 * U : 3 * U])
        a[:, 3 * U :] = sigmoid(z[:, 3 * U :])
        c = a[:, U : 2 * U] * c + a[:, :U] * a[:, 2 * U : 3 * U]
        tc = np.tanh(c)
        h = a[:, 3 * U :] * tc
        hs[:, t], cs[:, t], tcs[:, t] = h, c, tc
    cache = (xs, h_init, c_init, hs, cs, acts, tcs)
    return hs, (h, c), cache


def lstm_backward(Wx, Wh, cache, dhs=None, dh_last=None, dc_last=None):
    """Reverse pass of :func:`lstm_forward`.

    ``dhs`` is the upstream gradient on every hidden state (or None) and
    ``dh_last``/``dc_last`` on the final state. Returns
    ``(dxs, dh0, dc0, dWx, dWh, db)``.
    """
    xs, h0, c0, hs, cs, acts, tcs = cache
    B, S, n_in = xs.shape
    U = Wh.shape[0]
    dtype = Wh.dtype
    dh_next = np.zeros((B, U), dtype) if dh_last is None else dh_last
    dc_next = np.zeros((B, U), dtype) if dc_last is None else dc_last
    dz_all = np.empty((B, S, 4 * U), dtype)
    WhT = Wh.T
    for t in range(S - 1, -1, -1):
        dh = dh_next if dhs is None else dh_next + dhs[:, t]
        a = acts[:, t]
        i, f, g, o = a[:, :U], a[:, U : 2 * U], a[:, 2 * U : 3 * U], a[:, 3 * U :]
        tc = tcs[:, t]
        c_prev = cs[:, t - 1] if t > 0 else c0
        dc = dc_next + dh * o * (1.0 - tc * tc)
        dz = dz_all[:, t]
        dz[:, :U] = dc * g * i * (1.0 - i)
        dz[:, U : 2 * U] = dc * c_prev * f * (1.0 - f)
        dz[:, 2 * U : 3 * U] = dc * i * (1.0 - g * g)
        dz[:, 3 * U :] = dh * tc * o * (1.0 - o)
        dh_next = dz @ WhT
        dc_next = dc * f
    flat_dz = dz_all.reshape(B * S, 4 * U)
    h_prev = np.concatenate([h0[:, None, :], hs[:, :-1]], axis=1).reshape(B * S, U)
    dWx = xs.reshape(B * S, n_in).T @ flat_dz
    dWh = h_prev.T @ flat_dz
    db = flat_dz.sum(axis=0)
    dxs = (flat_dz @ Wx.T).reshape(B, S, n_in)
    return dxs, dh_next, dc_next, dWx, dWh, db
