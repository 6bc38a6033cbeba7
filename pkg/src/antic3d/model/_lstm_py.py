"""Pure NumPy LSTM layer kernels (fallback for the compiled extension).

Shapes: x (L, B, D); h0, c0 (B, H); Wx (D, 4H); Wh (H, 4H); b (4H,).
Gate blocks are ordered input, forget, cell candidate, output. ``gates``
holds post-activation values.
"""

import numpy as np


def _sigmoid(z):
    return 1.0 / (1.0 + np.exp(-z))


def lstm_forward(x, h0, c0, Wx, Wh, b):
    L, B, _ = x.shape
    H = h0.shape[1]
    hs = np.empty((L, B, H))
    cs = np.empty((L, B, H))
    gates = np.empty((L, B, 4 * H))
    h, c = h0, c0
    for t in range(L):
        z = x[t] @ Wx
        z += h @ Wh
        z += b
        i = _sigmoid(z[:, :H])
        f = _sigmoid(z[:, H : 2 * H])
        g = np.tanh(z[:, 2 * H : 3 * H])
        o = _sigmoid(z[:, 3 * H :])
        c = f * c + i * g
        h = o * np.tanh(c)
        gates[t, :, :H] = i
        gates[t, :, H : 2 * H] = f
        gates[t, :, 2 * H : 3 * H] = g
        gates[t, :, 3 * H :] = o
        hs[t] = h
        cs[t] = c
    return hs, cs, gates


def lstm_backward(x, h0, c0, Wx, Wh, hs, cs, gates, dhs):
    L, B, D = x.shape
    H = h0.shape[1]
    dz_all = np.empty((L, B, 4 * H))
    dh_next = np.zeros((B, H))
    dc_next = np.zeros((B, H))
    for t in range(L - 1, -1, -1):
        c_prev = cs[t - 1] if t else c0
        i = gates[t, :, :H]
        f = gates[t, :, H : 2 * H]
        g = gates[t, :, 2 * H : 3 * H]
        o = gates[t, :, 3 * H :]
        dh = dhs[t] + dh_next
        tc = np.tanh(cs[t])
        dc = dc_next + dh * o * (1.0 - tc * tc)
        dz = dz_all[t]
        dz[:, :H] = dc * g * i * (1.0 - i)
        dz[:, H : 2 * H] = dc * c_prev * f * (1.0 - f)
        dz[:, 2 * H : 3 * H] = dc * i * (1.0 - g * g)
        dz[:, 3 * H :] = dh * tc * o * (1.0 - o)
        dc_next = dc * f
        dh_next = dz @ Wh.T
    # only the recurrent path needs the time loop; the rest is one GEMM each
    dz2 = dz_all.reshape(L * B, 4 * H)
    h_prev = np.concatenate([h0[None], hs[:-1]]).reshape(L * B, H)
    dWx = x.reshape(L * B, D).T @ dz2
    dWh = h_prev.T @ dz2
    db = dz2.sum(axis=0)
    dx = (dz2 @ Wx.T).reshape(L, B, D)
    return dx, dWx, dWh, db
