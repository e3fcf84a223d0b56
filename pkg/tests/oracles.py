"""Straight-line scalar reimplementations used as independent test oracles.

Everything here works element by element on Python floats so that it shares
no vectorised code path with the package under test.
"""

import math


def sig(x):
    return 1.0 / (1.0 + math.exp(-x))


def dot(u, v):
    return sum(float(a) * float(b) for a, b in zip(u, v))


def matvec_T(W, x):
    """y_j = sum_i x_i W[i][j] (W stored input x output)."""
    return [sum(float(x[i]) * float(W[i][j]) for i in range(len(x))) for j in range(len(W[0]))]


def lstm_states(W, b, seq):
    """All hidden states of an LSTM with gate blocks ordered i, f, o, g and
    weights acting on [x; h]."""
    H = len(b) // 4
    h = [0.0] * H
    c = [0.0] * H
    states = []
    for x in seq:
        xh = [float(v) for v in x] + h
        z = [sum(xh[r] * float(W[r][k]) for r in range(len(xh))) + float(b[k]) for k in range(4 * H)]
        i = [sig(z[k]) for k in range(H)]
        f = [sig(z[H + k]) for k in range(H)]
        o = [sig(z[2 * H + k]) for k in range(H)]
        g = [math.tanh(z[3 * H + k]) for k in range(H)]
        c = [f[k] * c[k] + i[k] * g[k] for k in range(H)]
        h = [o[k] * math.tanh(c[k]) for k in range(H)]
        states.append(h)
    return states


def doc_fusion(p, L_seq, A_seq, precomputed=False):
    """Fused vector and gates: states from two LSTMs, scalar gates, gated
    projections plus bias."""
    if precomputed:
        h_l, h_a = list(L_seq), list(A_seq)
    else:
        h_l = lstm_states(p["lstm_l.W"], p["lstm_l.b"], L_seq)[-1]
        h_a = lstm_states(p["lstm_a.W"], p["lstm_a.b"], A_seq)[-1]
    w_l = sig(dot(p["gate_l.w"], h_l) + float(p["gate_l.b"][0]))
    w_a = sig(dot(p["gate_a.w"], h_a) + float(p["gate_a.b"][0]))
    u_l = matvec_T(p["fuse.W_l"], h_l)
    u_a = matvec_T(p["fuse.W_a"], h_a)
    h_la = [w_l * u_l[j] + w_a * u_a[j] + float(p["fuse.b"][j]) for j in range(len(u_l))]
    return h_la, w_l, w_a


def seg_fusion(p, L_seq, A_seq):
    """Per-segment fused vectors, gates and their gate-weighted mean."""
    joint = [[float(v) for v in l] + [float(v) for v in a] for l, a in zip(L_seq, A_seq)]
    per, gates = [], []
    for h in lstm_states(p["lstm.W"], p["lstm.b"], joint):
        w = sig(dot(p["gate.w"], h) + float(p["gate.b"][0]))
        u = matvec_T(p["proj.W"], h)
        per.append([w * u[j] + float(p["proj.b"][j]) for j in range(len(u))])
        gates.append(w)
    total = sum(gates)
    pooled = [sum(gates[i] * per[i][j] for i in range(len(per))) / total for j in range(len(per[0]))]
    return per, gates, pooled


def attention_doc(p, seq):
    """Softmax attention over LSTM states, then a tanh dense layer."""
    states = lstm_states(p["lstm.W"], p["lstm.b"], seq)
    scores = [dot(p["att.v"], h) + float(p["att.c"][0]) for h in states]
    m = max(scores)
    e = [math.exp(s - m) for s in scores]
    alpha = [v / sum(e) for v in e]
    ctx = [sum(alpha[t] * states[t][k] for t in range(len(states))) for k in range(len(states[0]))]
    z = matvec_T(p["doc.W"], ctx)
    return [math.tanh(z[j] + float(p["doc.b"][j])) for j in range(len(z))], alpha


def auc_pairs(scores, labels):
    """Fraction of positive/negative pairs ranked correctly, ties counting 1/2."""
    pos = [s for s, y in zip(scores, labels) if y]
    neg = [s for s, y in zip(scores, labels) if not y]
    good = 0.0
    for a in pos:
        for b in neg:
            good += 1.0 if a > b else 0.5 if a == b else 0.0
    return good / (len(pos) * len(neg))
