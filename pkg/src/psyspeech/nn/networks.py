"""The architectures used by the pipeline, each with an exact backward pass.

Every network keeps its tensors in a flat ``params`` dict keyed by dotted
names, so the optimizer, gradient checker and serializer treat them alike.
A network's ``forward`` returns a dict holding ``logits``, the
``penultimate`` activations and whatever the backward pass needs.
"""

import copy

import numpy as np

from . import layers as L


class Network:
    """Base class: head handling, losses and the penultimate contract."""

    kind = "network"

    def __init__(self, seed=0, head="softmax", n_out=2, **arch):
        if head not in ("softmax", "sigmoid"):
            raise ValueError(f"unknown head {head!r}")
        self.arch = dict(arch, head=head, n_out=int(n_out))
        self.seed = int(seed)
        self.params = self.init_params(np.random.default_rng(self.seed))

    # subclasses implement these three
    def init_params(self, rng):
        raise NotImplementedError

    def forward(self, inputs, params=None):
        raise NotImplementedError

    def backward(self, out, dlogits, params=None):
        raise NotImplementedError

    # ------------------------------------------------------------------
    def _p(self, params):
        return self.params if params is None else params

    def _head(self, rng, in_dim):
        W, b = L.init_dense(rng, in_dim, self.arch["n_out"])
        return {"out.W": W, "out.b": b}

    def _head_forward(self, e, p):
        return e @ p["out.W"] + p["out.b"]

    def _head_backward(self, dlogits, e, p, grads):
        grads["out.W"] = e.T @ dlogits
        grads["out.b"] = dlogits.sum(axis=0)
        return dlogits @ p["out.W"].T

    def _loss(self, logits, targets):
        if self.arch["head"] == "softmax":
            y = np.asarray(targets, dtype=np.int64)
            return L.softmax_xent(logits, y)
        return L.sigmoid_xent(logits, targets)

    def loss(self, inputs, targets, params=None):
        out = self.forward(inputs, params)
        return self._loss(out["logits"], targets)[0]

    def loss_and_grads(self, inputs, targets, params=None):
        out = self.forward(inputs, params)
        loss, dlogits, _ = self._loss(out["logits"], targets)
        if not np.isfinite(loss):
            raise FloatingPointError(f"non-finite loss {loss} in {self.kind}")
        return loss, self.backward(out, dlogits, params)

    def predict_proba(self, inputs):
        logits = self.forward(inputs)["logits"]
        if self.arch["head"] == "softmax":
            return L.softmax(logits)
        return L.sigmoid(logits)

    def penultimate(self, inputs):
        """Activations feeding the output layer (the transferable embedding)."""
        return self.forward(inputs)["penultimate"]

    def copy(self):
        return copy.deepcopy(self)

    def n_params(self):
        return sum(v.size for v in self.params.values())


def _dense_block(x, W, b, act):
    z = x @ W + b
    return z, L.activate(z, act)


class LstmClassifier(Network):
    """LSTM -> dense embedding layer -> output head.

    Used for the emotion encoders (softmax over 4 emotions) and for the
    12-label audio segment compressor (independent sigmoids).
    """

    kind = "lstm_classifier"

    def __init__(self, input_dim, hidden_dim=16, emb_dim=32, emb_act="tanh", **kw):
        super().__init__(
            input_dim=int(input_dim), hidden_dim=int(hidden_dim),
            emb_dim=int(emb_dim), emb_act=emb_act, **kw,
        )

    def init_params(self, rng):
        a = self.arch
        p = {}
        p["lstm.W"], p["lstm.b"] = L.init_lstm(rng, a["input_dim"], a["hidden_dim"])
        p["emb.W"], p["emb.b"] = L.init_dense(rng, a["hidden_dim"], a["emb_dim"])
        p.update(self._head(rng, a["emb_dim"]))
        return p

    def forward(self, inputs, params=None):
        p = self._p(params)
        X, mask = L.pad_sequences(inputs, self.arch["input_dim"])
        H_all, h, lc = L.lstm_forward(p["lstm.W"], p["lstm.b"], X, mask)
        z, e = _dense_block(h, p["emb.W"], p["emb.b"], self.arch["emb_act"])
        return {"logits": self._head_forward(e, p), "penultimate": e,
                "h": h, "z": z, "lstm": lc}

    def backward(self, out, dlogits, params=None):
        p = self._p(params)
        g = {}
        de = self._head_backward(dlogits, out["penultimate"], p, g)
        dz = L.activate_backward(de, out["penultimate"], out["z"], self.arch["emb_act"])
        g["emb.W"] = out["h"].T @ dz
        g["emb.b"] = dz.sum(axis=0)
        dh = dz @ p["emb.W"].T
        _, g["lstm.W"], g["lstm.b"] = L.lstm_backward(None, dh, out["lstm"])
        return g


class ConvLstmClassifier(Network):
    """2-D convolution over a (time x mel) spectrogram, ReLU, then an LSTM
    reading the feature-map rows in time order, a dense layer and a head."""

    kind = "conv_lstm_classifier"

    def __init__(self, n_mels, channels=4, kernel=(3, 3), stride=(1, 1),
                 hidden_dim=16, emb_dim=32, emb_act="tanh", **kw):
        kh, kw_ = kernel
        if kh < 1 or kw_ < 1:
            raise ValueError("kernel sizes must be >= 1")
        super().__init__(
            n_mels=int(n_mels), channels=int(channels), kernel=[int(kh), int(kw_)],
            stride=[int(stride[0]), int(stride[1])], hidden_dim=int(hidden_dim),
            emb_dim=int(emb_dim), emb_act=emb_act, **kw,
        )

    @property
    def _freq_out(self):
        a = self.arch
        return (a["n_mels"] - a["kernel"][1]) // a["stride"][1] + 1

    def init_params(self, rng):
        a = self.arch
        if a["n_mels"] < a["kernel"][1]:
            raise ValueError("spectrogram narrower than kernel")
        p = {}
        p["conv.K"], p["conv.b"] = L.init_conv2d(rng, 1, a["channels"], *a["kernel"])
        seq_dim = a["channels"] * self._freq_out
        p["lstm.W"], p["lstm.b"] = L.init_lstm(rng, seq_dim, a["hidden_dim"])
        p["emb.W"], p["emb.b"] = L.init_dense(rng, a["hidden_dim"], a["emb_dim"])
        p.update(self._head(rng, a["emb_dim"]))
        return p

    def forward(self, inputs, params=None):
        p = self._p(params)
        a = self.arch
        kh, sh = a["kernel"][0], a["stride"][0]
        for s in inputs:
            if np.shape(s)[0] < kh or np.shape(s)[1] < a["kernel"][1]:
                raise ValueError(f"spectrogram {np.shape(s)} smaller than kernel {a['kernel']}")
        X, _ = L.pad_sequences(inputs, a["n_mels"])
        conv_z, cc = L.conv2d_forward(p["conv.K"], p["conv.b"], X[:, None], tuple(a["stride"]))
        conv_a = np.maximum(conv_z, 0.0)
        B, C, To, Fo = conv_a.shape
        lengths = np.array([(np.shape(s)[0] - kh) // sh + 1 for s in inputs])
        mask = (np.arange(To)[None, :] < lengths[:, None]).astype(np.float64)
        seq = conv_a.transpose(0, 2, 1, 3).reshape(B, To, C * Fo)
        H_all, h, lc = L.lstm_forward(p["lstm.W"], p["lstm.b"], seq, mask)
        z, e = _dense_block(h, p["emb.W"], p["emb.b"], a["emb_act"])
        return {"logits": self._head_forward(e, p), "penultimate": e, "h": h, "z": z,
                "lstm": lc, "conv": cc, "conv_z": conv_z, "conv_shape": conv_a.shape}

    def backward(self, out, dlogits, params=None):
        p = self._p(params)
        g = {}
        de = self._head_backward(dlogits, out["penultimate"], p, g)
        dz = L.activate_backward(de, out["penultimate"], out["z"], self.arch["emb_act"])
        g["emb.W"] = out["h"].T @ dz
        g["emb.b"] = dz.sum(axis=0)
        dh = dz @ p["emb.W"].T
        dseq, g["lstm.W"], g["lstm.b"] = L.lstm_backward(None, dh, out["lstm"])
        B, C, To, Fo = out["conv_shape"]
        dconv = dseq.reshape(B, To, C, Fo).transpose(0, 2, 1, 3) * (out["conv_z"] > 0)
        _, g["conv.K"], g["conv.b"] = L.conv2d_backward(dconv, out["conv"])
        return g


class AttentionLstm(Network):
    """Document network over a sequence of segment vectors.

    LSTM states are pooled with softmax attention, passed through a tanh
    dense layer (the document representation) and a head.
    """

    kind = "attention_lstm"

    def __init__(self, input_dim, hidden_dim=64, doc_dim=64, **kw):
        kw.setdefault("head", "sigmoid")
        kw.setdefault("n_out", 1)
        super().__init__(input_dim=int(input_dim), hidden_dim=int(hidden_dim),
                         doc_dim=int(doc_dim), **kw)

    def init_params(self, rng):
        a = self.arch
        p = {}
        p["lstm.W"], p["lstm.b"] = L.init_lstm(rng, a["input_dim"], a["hidden_dim"])
        lim = 1.0 / np.sqrt(a["hidden_dim"])
        p["att.v"] = rng.uniform(-lim, lim, size=a["hidden_dim"])
        p["att.c"] = np.zeros(1)
        p["doc.W"], p["doc.b"] = L.init_dense(rng, a["hidden_dim"], a["doc_dim"])
        p.update(self._head(rng, a["doc_dim"]))
        return p

    def forward(self, inputs, params=None):
        p = self._p(params)
        X, mask = L.pad_sequences(inputs, self.arch["input_dim"])
        H_all, _, lc = L.lstm_forward(p["lstm.W"], p["lstm.b"], X, mask)
        ctx, alpha, ac = L.attention_forward(p["att.v"], p["att.c"][0], H_all, mask)
        z, e = _dense_block(ctx, p["doc.W"], p["doc.b"], "tanh")
        return {"logits": self._head_forward(e, p), "penultimate": e, "attention": alpha,
                "ctx": ctx, "z": z, "lstm": lc, "att": ac, "mask": mask}

    def backward(self, out, dlogits, params=None):
        p = self._p(params)
        g = {}
        de = self._head_backward(dlogits, out["penultimate"], p, g)
        dz = L.activate_backward(de, out["penultimate"], out["z"], "tanh")
        g["doc.W"] = out["ctx"].T @ dz
        g["doc.b"] = dz.sum(axis=0)
        dctx = dz @ p["doc.W"].T
        dH, g["att.v"], dc = L.attention_backward(dctx, out["att"])
        g["att.c"] = np.array([dc])
        _, g["lstm.W"], g["lstm.b"] = L.lstm_backward(dH, None, out["lstm"])
        return g

    def attention(self, inputs):
        out = self.forward(inputs)
        return [out["attention"][k, : len(s)] for k, s in enumerate(inputs)]


class DocFusionNet(Network):
    """Gated bimodal fusion of two modality LSTMs.

    Each modality LSTM reads its own sequence and yields a final state.  A
    scalar sigmoid gate per modality scales a linear projection of that
    state; the gated projections plus a bias form the fused vector, which
    a sigmoid head reads.  With ``precomputed=True`` the inputs are the
    two state vectors themselves and no LSTM is run.
    """

    kind = "doc_fusion"

    def __init__(self, text_dim, audio_dim, hidden_text=64, hidden_audio=64,
                 fused_dim=64, precomputed=False, **kw):
        kw.setdefault("head", "sigmoid")
        kw.setdefault("n_out", 1)
        super().__init__(text_dim=int(text_dim), audio_dim=int(audio_dim),
                         hidden_text=int(hidden_text), hidden_audio=int(hidden_audio),
                         fused_dim=int(fused_dim), precomputed=bool(precomputed), **kw)

    def _dims(self):
        a = self.arch
        if a["precomputed"]:
            return a["text_dim"], a["audio_dim"]
        return a["hidden_text"], a["hidden_audio"]

    def init_params(self, rng):
        a = self.arch
        hl, ha = self._dims()
        p = {}
        if not a["precomputed"]:
            p["lstm_l.W"], p["lstm_l.b"] = L.init_lstm(rng, a["text_dim"], hl)
            p["lstm_a.W"], p["lstm_a.b"] = L.init_lstm(rng, a["audio_dim"], ha)
        p["gate_l.w"] = rng.uniform(-1, 1, size=hl) / np.sqrt(hl)
        p["gate_l.b"] = np.zeros(1)
        p["gate_a.w"] = rng.uniform(-1, 1, size=ha) / np.sqrt(ha)
        p["gate_a.b"] = np.zeros(1)
        p["fuse.W_l"], _ = L.init_dense(rng, hl, a["fused_dim"])
        p["fuse.W_a"], p["fuse.b"] = L.init_dense(rng, ha, a["fused_dim"])
        p.update(self._head(rng, a["fused_dim"]))
        return p

    def forward(self, inputs, params=None):
        p = self._p(params)
        a = self.arch
        out = {}
        if a["precomputed"]:
            h_l = np.array([np.asarray(x[0], dtype=np.float64) for x in inputs])
            h_a = np.array([np.asarray(x[1], dtype=np.float64) for x in inputs])
        else:
            Xl, ml = L.pad_sequences([x[0] for x in inputs], a["text_dim"])
            Xa, ma = L.pad_sequences([x[1] for x in inputs], a["audio_dim"])
            _, h_l, out["lstm_l"] = L.lstm_forward(p["lstm_l.W"], p["lstm_l.b"], Xl, ml)
            _, h_a, out["lstm_a"] = L.lstm_forward(p["lstm_a.W"], p["lstm_a.b"], Xa, ma)
        w_l = L.sigmoid(h_l @ p["gate_l.w"] + p["gate_l.b"][0])
        w_a = L.sigmoid(h_a @ p["gate_a.w"] + p["gate_a.b"][0])
        u_l = h_l @ p["fuse.W_l"]
        u_a = h_a @ p["fuse.W_a"]
        h_la = w_l[:, None] * u_l + w_a[:, None] * u_a + p["fuse.b"]
        out.update(logits=self._head_forward(h_la, p), penultimate=h_la, h_l=h_l, h_a=h_a,
                   w_l=w_l, w_a=w_a, u_l=u_l, u_a=u_a)
        return out

    def backward(self, out, dlogits, params=None):
        p = self._p(params)
        g = {}
        dh_la = self._head_backward(dlogits, out["penultimate"], p, g)
        g["fuse.b"] = dh_la.sum(axis=0)
        for m in ("l", "a"):
            w, u, h = out[f"w_{m}"], out[f"u_{m}"], out[f"h_{m}"]
            du = w[:, None] * dh_la
            g[f"fuse.W_{m}"] = h.T @ du
            dzg = (dh_la * u).sum(axis=1) * w * (1.0 - w)
            g[f"gate_{m}.w"] = h.T @ dzg
            g[f"gate_{m}.b"] = np.array([dzg.sum()])
            dh = du @ p[f"fuse.W_{m}"].T + dzg[:, None] * p[f"gate_{m}.w"][None, :]
            if not self.arch["precomputed"]:
                _, g[f"lstm_{m}.W"], g[f"lstm_{m}.b"] = L.lstm_backward(None, dh, out[f"lstm_{m}"])
        return g

    def gates(self, inputs):
        out = self.forward(inputs)
        return out["w_l"], out["w_a"]


class SegFusionNet(Network):
    """Joint LSTM over per-segment concatenated text/audio vectors.

    Each step's state gets a scalar sigmoid attention gate that scales a
    linear projection (plus bias).  The document vector is the gate-weighted
    mean of the per-segment fused vectors; a sigmoid head reads it.
    """

    kind = "seg_fusion"

    def __init__(self, text_dim, audio_dim, hidden_dim=64, fused_dim=64, **kw):
        kw.setdefault("head", "sigmoid")
        kw.setdefault("n_out", 1)
        super().__init__(text_dim=int(text_dim), audio_dim=int(audio_dim),
                         hidden_dim=int(hidden_dim), fused_dim=int(fused_dim), **kw)

    def init_params(self, rng):
        a = self.arch
        H = a["hidden_dim"]
        p = {}
        p["lstm.W"], p["lstm.b"] = L.init_lstm(rng, a["text_dim"] + a["audio_dim"], H)
        p["gate.w"] = rng.uniform(-1, 1, size=H) / np.sqrt(H)
        p["gate.b"] = np.zeros(1)
        p["proj.W"], p["proj.b"] = L.init_dense(rng, H, a["fused_dim"])
        p.update(self._head(rng, a["fused_dim"]))
        return p

    @staticmethod
    def joint_sequences(inputs):
        seqs = []
        for k, (lt, at) in enumerate(inputs):
            lt, at = np.atleast_2d(lt), np.atleast_2d(at)
            if lt.shape[0] != at.shape[0]:
                raise ValueError(f"document {k}: {lt.shape[0]} text vs {at.shape[0]} audio segments")
            seqs.append(np.concatenate([lt, at], axis=1))
        return seqs

    def forward(self, inputs, params=None):
        p = self._p(params)
        a = self.arch
        X, mask = L.pad_sequences(self.joint_sequences(inputs), a["text_dim"] + a["audio_dim"])
        H_all, _, lc = L.lstm_forward(p["lstm.W"], p["lstm.b"], X, mask)
        w = L.sigmoid(H_all @ p["gate.w"] + p["gate.b"][0])  # (B, T)
        u = H_all @ p["proj.W"]
        h_seg = w[:, :, None] * u + p["proj.b"]
        wm = w * mask
        S = wm.sum(axis=1)
        pooled = np.einsum("bt,btf->bf", wm, h_seg) / S[:, None]
        return {"logits": self._head_forward(pooled, p), "penultimate": pooled, "gates": w,
                "h_seg": h_seg, "u": u, "H_all": H_all, "S": S, "mask": mask, "lstm": lc}

    def backward(self, out, dlogits, params=None):
        p = self._p(params)
        g = {}
        dpooled = self._head_backward(dlogits, out["penultimate"], p, g)
        w, u, h_seg, H_all = out["gates"], out["u"], out["h_seg"], out["H_all"]
        S, mask, pooled = out["S"], out["mask"], out["penultimate"]
        dN = dpooled / S[:, None]
        dS = -(dpooled * pooled).sum(axis=1) / S
        dh_seg = (mask * w)[:, :, None] * dN[:, None, :]
        dw = mask * (np.einsum("bf,btf->bt", dN, h_seg) + dS[:, None])
        dw = dw + (dh_seg * u).sum(axis=2)
        du = w[:, :, None] * dh_seg
        g["proj.b"] = dh_seg.sum(axis=(0, 1))
        g["proj.W"] = np.einsum("bth,btf->hf", H_all, du)
        dz = dw * w * (1.0 - w)
        g["gate.w"] = np.einsum("bt,bth->h", dz, H_all)
        g["gate.b"] = np.array([dz.sum()])
        dH = du @ p["proj.W"].T + dz[:, :, None] * p["gate.w"][None, None, :]
        _, g["lstm.W"], g["lstm.b"] = L.lstm_backward(dH, None, out["lstm"])
        return g

    def segment_weights(self, inputs):
        """Per-segment gates normalised to sum to one within each document."""
        out = self.forward(inputs)
        res = []
        for k, (lt, _) in enumerate(inputs):
            n = np.atleast_2d(lt).shape[0]
            w = out["gates"][k, :n]
            res.append(w / w.sum())
        return res


ARCHITECTURES = {
    cls.kind: cls
    for cls in (LstmClassifier, ConvLstmClassifier, AttentionLstm, DocFusionNet, SegFusionNet)
}
