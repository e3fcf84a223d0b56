"""Batched forward/backward primitives in float64.

Sequences are padded to ``(batch, time, dim)`` and carry a ``(batch, time)``
mask.  A masked step leaves the recurrent state untouched, so the "final"
state of a padded sequence is the state after its last real step.
"""

import numpy as np


def sigmoid(z):
    z = np.asarray(z, dtype=np.float64)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def softmax(z, axis=-1):
    z = np.asarray(z, dtype=np.float64)
    z = z - z.max(axis=axis, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=axis, keepdims=True)


def pad_sequences(seqs, dim=None):
    """Stack a list of ``(T_i, D)`` arrays into ``(B, T_max, D)`` plus mask."""
    if len(seqs) == 0:
        raise ValueError("empty batch")
    seqs = [np.atleast_2d(np.asarray(s, dtype=np.float64)) for s in seqs]
    for s in seqs:
        if s.shape[0] == 0:
            raise ValueError("empty sequence")
    dim = seqs[0].shape[1] if dim is None else dim
    t_max = max(s.shape[0] for s in seqs)
    X = np.zeros((len(seqs), t_max, dim))
    mask = np.zeros((len(seqs), t_max))
    for k, s in enumerate(seqs):
        if s.shape[1] != dim:
            raise ValueError(f"sequence {k} has dim {s.shape[1]}, expected {dim}")
        X[k, : s.shape[0]] = s
        mask[k, : s.shape[0]] = 1.0
    return X, mask


# ---------------------------------------------------------------- LSTM


def init_lstm(rng, input_dim, hidden_dim):
    """Uniform(+-1/sqrt(fan_in)) weights, forget-gate bias +1.

    Gate layout along the last axis of ``W``/``b``: input, forget, output,
    candidate.  ``W`` acts on ``[x_t; h_{t-1}]``.
    """
    fan_in = input_dim + hidden_dim
    lim = 1.0 / np.sqrt(fan_in)
    W = rng.uniform(-lim, lim, size=(fan_in, 4 * hidden_dim))
    b = np.zeros(4 * hidden_dim)
    b[hidden_dim : 2 * hidden_dim] = 1.0
    return W, b


def lstm_forward(W, b, X, mask=None):
    """Run an LSTM over a padded batch.

    Returns ``(H_all, h_final, cache)`` with ``H_all`` of shape (B, T, H).
    """
    B, T, D = X.shape
    H = W.shape[1] // 4
    if W.shape[0] != D + H:
        raise ValueError(f"LSTM expects input dim {W.shape[0] - H}, got {D}")
    if T == 0:
        raise ValueError("empty sequence")
    if mask is None:
        mask = np.ones((B, T))
    h = np.zeros((B, H))
    c = np.zeros((B, H))
    H_all = np.zeros((B, T, H))
    steps = []
    for t in range(T):
        xh = np.concatenate([X[:, t], h], axis=1)
        z = xh @ W + b
        i = sigmoid(z[:, :H])
        f = sigmoid(z[:, H : 2 * H])
        o = sigmoid(z[:, 2 * H : 3 * H])
        g = np.tanh(z[:, 3 * H :])
        c_new = f * c + i * g
        tc = np.tanh(c_new)
        h_new = o * tc
        m = mask[:, t : t + 1]
        steps.append((xh, i, f, o, g, c, tc, m))
        c = m * c_new + (1.0 - m) * c
        h = m * h_new + (1.0 - m) * h
        H_all[:, t] = h
    cache = {"W": W, "steps": steps, "D": D}
    return H_all, h, cache


def lstm_backward(dH_all, dh_final, cache):
    """Backpropagation through time.  Either upstream gradient may be None."""
    W = cache["W"]
    D = cache["D"]
    steps = cache["steps"]
    H = W.shape[1] // 4
    B = steps[0][0].shape[0]
    T = len(steps)
    dW = np.zeros_like(W)
    db = np.zeros(W.shape[1])
    dX = np.zeros((B, T, D))
    dh = np.zeros((B, H)) if dh_final is None else np.array(dh_final, dtype=np.float64)
    dc = np.zeros((B, H))
    for t in range(T - 1, -1, -1):
        xh, i, f, o, g, c_prev, tc, m = steps[t]
        if dH_all is not None:
            dh = dh + dH_all[:, t]
        dh_new = m * dh
        dc_new = m * dc
        do = dh_new * tc
        dct = dc_new + dh_new * o * (1.0 - tc * tc)
        di = dct * g
        dg = dct * i
        df = dct * c_prev
        dz = np.concatenate(
            [di * i * (1 - i), df * f * (1 - f), do * o * (1 - o), dg * (1 - g * g)],
            axis=1,
        )
        dW += xh.T @ dz
        db += dz.sum(axis=0)
        dxh = dz @ W.T
        dX[:, t] = dxh[:, :D]
        dh = dxh[:, D:] + (1.0 - m) * dh
        dc = dct * f + (1.0 - m) * dc
    return dX, dW, db


# ---------------------------------------------------------------- dense


def init_dense(rng, in_dim, out_dim):
    lim = 1.0 / np.sqrt(in_dim)
    return rng.uniform(-lim, lim, size=(in_dim, out_dim)), np.zeros(out_dim)


def activate(z, kind):
    if kind == "identity":
        return z
    if kind == "tanh":
        return np.tanh(z)
    if kind == "relu":
        return np.maximum(z, 0.0)
    if kind == "sigmoid":
        return sigmoid(z)
    if kind == "softmax":
        return softmax(z)
    raise ValueError(f"unknown activation {kind!r}")


def activate_backward(dy, y, z, kind):
    """Gradient w.r.t. pre-activation given output ``y`` and input ``z``."""
    if kind == "identity":
        return dy
    if kind == "tanh":
        return dy * (1.0 - y * y)
    if kind == "relu":
        return dy * (z > 0)
    if kind == "sigmoid":
        return dy * y * (1.0 - y)
    if kind == "softmax":
        return y * (dy - (dy * y).sum(axis=-1, keepdims=True))
    raise ValueError(f"unknown activation {kind!r}")


# ---------------------------------------------------------------- attention


def attention_forward(v, c, H_all, mask):
    """Softmax attention pooling over time: score_t = v.h_t + c."""
    scores = H_all @ v + c
    scores = np.where(mask > 0, scores, -np.inf)
    alpha = softmax(scores, axis=1)
    alpha = np.where(mask > 0, alpha, 0.0)
    ctx = np.einsum("bt,bth->bh", alpha, H_all)
    return ctx, alpha, {"v": v, "H_all": H_all, "alpha": alpha}


def attention_backward(dctx, cache):
    v, H_all, alpha = cache["v"], cache["H_all"], cache["alpha"]
    dalpha = np.einsum("bh,bth->bt", dctx, H_all)
    ds = alpha * (dalpha - (alpha * dalpha).sum(axis=1, keepdims=True))
    dv = np.einsum("bt,bth->h", ds, H_all)
    dc = ds.sum()
    dH = alpha[:, :, None] * dctx[:, None, :] + ds[:, :, None] * v[None, None, :]
    return dH, dv, dc


# ---------------------------------------------------------------- conv2d


def init_conv2d(rng, in_ch, out_ch, kh, kw):
    fan_in = in_ch * kh * kw
    lim = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-lim, lim, size=(out_ch, in_ch, kh, kw)), np.zeros(out_ch)


def conv2d_forward(K, bias, X, stride=(1, 1)):
    """Valid cross-correlation plus bias (no activation).

    ``X`` is (B, C_in, H, W); returns (B, C_out, H_out, W_out).
    """
    if X.ndim == 2:
        X = X[None, None]
    _, c_in, kh, kw = K.shape
    B, C, Hh, Ww = X.shape
    if C != c_in:
        raise ValueError(f"conv expects {c_in} input channels, got {C}")
    if Hh < kh or Ww < kw:
        raise ValueError(f"input {Hh}x{Ww} smaller than kernel {kh}x{kw}")
    sh, sw = stride
    win = np.lib.stride_tricks.sliding_window_view(X, (kh, kw), axis=(2, 3))
    win = win[:, :, ::sh, ::sw]  # (B, C, Ho, Wo, kh, kw)
    out = np.einsum("bchwij,ocij->bohw", win, K, optimize=True) + bias[None, :, None, None]
    return out, {"X": X, "K": K, "stride": stride, "win": win}


def conv2d_backward(dout, cache):
    X, K, (sh, sw), win = cache["X"], cache["K"], cache["stride"], cache["win"]
    _, _, kh, kw = K.shape
    dK = np.einsum("bohw,bchwij->ocij", dout, win, optimize=True)
    db = dout.sum(axis=(0, 2, 3))
    dX = np.zeros_like(X)
    Ho, Wo = dout.shape[2], dout.shape[3]
    for i in range(kh):
        for j in range(kw):
            contrib = np.einsum("bohw,oc->bchw", dout, K[:, :, i, j], optimize=True)
            dX[:, :, i : i + sh * (Ho - 1) + 1 : sh, j : j + sw * (Wo - 1) + 1 : sw] += contrib
    return dX, dK, db


# ---------------------------------------------------------------- losses


def softmax_xent(logits, y):
    """Mean cross-entropy for integer targets; returns (loss, dlogits, probs)."""
    p = softmax(logits)
    n = logits.shape[0]
    logp = logits - logits.max(axis=1, keepdims=True)
    logp = logp - np.log(np.exp(logp).sum(axis=1, keepdims=True))
    loss = -logp[np.arange(n), y].mean()
    d = p.copy()
    d[np.arange(n), y] -= 1.0
    return loss, d / n, p


def sigmoid_xent(logits, y):
    """Mean binary cross-entropy over every entry of ``logits``."""
    y = np.asarray(y, dtype=np.float64).reshape(logits.shape)
    p = sigmoid(logits)
    # log(1+exp(-|z|)) form stays finite for large |z|
    loss = np.maximum(logits, 0) - logits * y + np.log1p(np.exp(-np.abs(logits)))
    return loss.mean(), (p - y) / logits.size, p
