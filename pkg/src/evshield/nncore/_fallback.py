"""Pure-numpy LSTM recurrence kernels, used when the compiled core is absent."""
import numpy as np


def _sigmoid(z):
    return 1.0 / (1.0 + np.exp(-z))


def lstm_forward(x, W, U, b):
    B, T, _ = x.shape
    G, H = U.shape
    xt = np.ascontiguousarray(np.transpose(x, (1, 0, 2)))
    hs = np.zeros((T + 1, B, H))
    cs = np.zeros((T + 1, B, H))
    tc = np.empty((T, B, H))
    acts = np.empty((T, B, G))
    for t in range(T):
        z = b + xt[t] @ W.T + hs[t] @ U.T
        z[:, :2 * H] = _sigmoid(z[:, :2 * H])
        z[:, 2 * H:3 * H] = np.tanh(z[:, 2 * H:3 * H])
        z[:, 3 * H:] = _sigmoid(z[:, 3 * H:])
        acts[t] = z
        cs[t + 1] = z[:, H:2 * H] * cs[t] + z[:, :H] * z[:, 2 * H:3 * H]
        tc[t] = np.tanh(cs[t + 1])
        hs[t + 1] = z[:, 3 * H:] * tc[t]
    return hs, cs, tc, acts


def lstm_backward(dhs, x, W, U, hs, cs, tc, acts):
    T, B, G = acts.shape
    H = G // 4
    I = W.shape[1]
    dz = np.empty((T, B, G))
    dh = np.zeros((B, H))
    dc = np.zeros((B, H))
    for t in range(T - 1, -1, -1):
        ig = acts[t, :, :H]
        fg = acts[t, :, H:2 * H]
        gg = acts[t, :, 2 * H:3 * H]
        og = acts[t, :, 3 * H:]
        th = tc[t]
        dht = dh + dhs[t]
        dct = dc + dht * og * (1.0 - th * th)
        dz[t, :, :H] = dct * gg * ig * (1.0 - ig)
        dz[t, :, H:2 * H] = dct * cs[t] * fg * (1.0 - fg)
        dz[t, :, 2 * H:3 * H] = dct * ig * (1.0 - gg * gg)
        dz[t, :, 3 * H:] = dht * th * og * (1.0 - og)
        dc = dct * fg
        dh = dz[t] @ U
    xt = np.transpose(x, (1, 0, 2)).reshape(T * B, I)
    dz2 = dz.reshape(T * B, G)
    dW = dz2.T @ xt
    dU = dz2.T @ hs[:T].reshape(T * B, H)
    db = dz2.sum(axis=0)
    dx = np.transpose((dz2 @ W).reshape(T, B, I), (1, 0, 2))
    return dW, dU, db, np.ascontiguousarray(dx)
