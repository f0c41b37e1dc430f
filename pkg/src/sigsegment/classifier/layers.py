"""Numpy forward/backward kernels for the CNN-LSTM.

Convolutions are 3x3 cross-correlations with zero padding 1 and stride 1,
lowered to a matrix product with im2col. Pooling is 2x2 max pooling with
stride 2. All arrays are float64 and laid out NCHW.
"""

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


def im2col(x):
    """``(B, C, H, W)`` -> ``(B, H*W, C*9)`` patches of the zero-padded input."""
    b, c, h, w = x.shape
    xp = np.pad(x, ((0, 0), (0, 0), (1, 1), (1, 1)))
    win = sliding_window_view(xp, (3, 3), axis=(2, 3))
    return win.transpose(0, 2, 3, 1, 4, 5).reshape(b, h * w, c * 9)


def col2im(dcols, shape):
    b, c, h, w = shape
    d = dcols.reshape(b, h, w, c, 3, 3)
    dxp = np.zeros((b, c, h + 2, w + 2))
    for di in range(3):
        for dj in range(3):
            dxp[:, :, di : di + h, dj : dj + w] += d[:, :, :, :, di, dj].transpose(0, 3, 1, 2)
    return dxp[:, :, 1:-1, 1:-1]


def conv_forward(x, weight, bias):
    b, _, h, w = x.shape
    f = weight.shape[0]
    cols = im2col(x)
    out = cols @ weight.reshape(f, -1).T + bias
    return out.transpose(0, 2, 1).reshape(b, f, h, w), cols


def conv_backward(dout, cols, x_shape, weight, need_dx=True):
    b, f, h, w = dout.shape
    d = dout.reshape(b, f, h * w).transpose(0, 2, 1)
    dweight = np.tensordot(d, cols, axes=([0, 1], [0, 1])).reshape(weight.shape)
    dbias = d.sum(axis=(0, 1))
    dx = col2im(d @ weight.reshape(f, -1), x_shape) if need_dx else None
    return dx, dweight, dbias


def _pool_view(x):
    b, c, h, w = x.shape
    return x.reshape(b, c, h // 2, 2, w // 2, 2).transpose(0, 1, 2, 4, 3, 5).reshape(b, c, h // 2, w // 2, 4)


def maxpool_forward(x):
    """2x2 max pool; returns output and the winning position in each window."""
    view = _pool_view(x)
    idx = view.argmax(axis=-1)
    out = np.take_along_axis(view, idx[..., None], axis=-1)[..., 0]
    return out, idx


def maxpool_backward(dout, idx, x_shape):
    b, c, h, w = x_shape
    dview = np.zeros((b, c, h // 2, w // 2, 4))
    np.put_along_axis(dview, idx[..., None], dout[..., None], axis=-1)
    return dview.reshape(b, c, h // 2, w // 2, 2, 2).transpose(0, 1, 2, 4, 3, 5).reshape(x_shape)


def sigmoid(z):
    # split on sign so exp never overflows
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def softmax(logits):
    shifted = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def lstm_forward(x, wx, wh, b):
    """Run an LSTM over ``x`` shaped ``(N, T, E)`` from zero state.

    ``wx`` is ``(4, H, E)``, ``wh`` is ``(4, H, H)`` and ``b`` is ``(4, H)``
    with gates ordered input, forget, cell candidate, output.
    """
    n, t_len, _ = x.shape
    hidden = wh.shape[1]
    wx2 = wx.reshape(4 * hidden, -1)
    wh2 = wh.reshape(4 * hidden, hidden)
    xz = x @ wx2.T + b.reshape(-1)
    h = np.zeros((n, hidden))
    c = np.zeros((n, hidden))
    steps = []
    for t in range(t_len):
        z = xz[:, t] + h @ wh2.T
        i = sigmoid(z[:, :hidden])
        f = sigmoid(z[:, hidden : 2 * hidden])
        g = np.tanh(z[:, 2 * hidden : 3 * hidden])
        o = sigmoid(z[:, 3 * hidden :])
        c_prev, h_prev = c, h
        c = f * c_prev + i * g
        tc = np.tanh(c)
        h = o * tc
        steps.append((i, f, g, o, c_prev, h_prev, tc))
    return h, steps


def lstm_backward(dh_last, x, wx, wh, steps):
    """Backpropagate through time from a gradient on the final hidden state."""
    n, t_len, _ = x.shape
    hidden = wh.shape[1]
    wx2 = wx.reshape(4 * hidden, -1)
    wh2 = wh.reshape(4 * hidden, hidden)
    dxz = np.empty((n, t_len, 4 * hidden))
    dwh = np.zeros_like(wh2)
    dh = dh_last
    dc = np.zeros((n, hidden))
    for t in reversed(range(t_len)):
        i, f, g, o, c_prev, h_prev, tc = steps[t]
        do = dh * tc
        dc = dc + dh * o * (1.0 - tc * tc)
        di = dc * g
        dg = dc * i
        df = dc * c_prev
        dz = np.concatenate(
            [di * i * (1.0 - i), df * f * (1.0 - f), dg * (1.0 - g * g), do * o * (1.0 - o)], axis=1
        )
        dxz[:, t] = dz
        dwh += dz.T @ h_prev
        dh = dz @ wh2
        dc = dc * f
    dwx = np.tensordot(dxz, x, axes=([0, 1], [0, 1]))
    db = dxz.sum(axis=(0, 1))
    dx = dxz @ wx2
    return dx, dwx.reshape(wx.shape), dwh.reshape(wh.shape), db.reshape(4, hidden)
