"""Document representations and bimodal gated fusion.

Document level: separate language/acoustic LSTMs give final states h_l and
h_a; scalar gates w_l = sigmoid(W_hl . h_l + b_l), w_a = sigmoid(W_ha . h_a + b_a)
weight the projections in h_la = w_l * (W_l h_l) + w_a * (W_a h_a) + b_la.

Segment level: one joint LSTM over the concatenated per-segment vectors
[L; A]; each step's state h gets w = sigmoid(W_h . h + b) and
h_la = w * (W h) + b_la; the document vector is the w-weighted mean of the
per-segment h_la.
"""

from dataclasses import dataclass, field

import numpy as np

from .corpus import SEGMENT_LABEL_NAMES
from .nn import AttentionLstm, DocFusionNet, LstmClassifier, SegFusionNet, TrainConfig, train
from .nn.layers import sigmoid


@dataclass(frozen=True)
class GateParams:
    W_hl: np.ndarray
    b_l: float
    W_ha: np.ndarray
    b_a: float


@dataclass(frozen=True)
class FusionParams:
    W_l: np.ndarray  # fused x language hidden
    W_a: np.ndarray  # fused x acoustic hidden
    b_la: np.ndarray


@dataclass(frozen=True)
class SegAttentionParams:
    W_h: np.ndarray
    b: float
    W: np.ndarray  # fused x hidden
    b_la: np.ndarray


@dataclass
class BimodalEmbedding:
    h_la: np.ndarray
    gates: dict = field(default_factory=dict)


# -------------------------------------------------------------- parameter views


def doc_fusion_parts(net):
    p = net.params
    gates = GateParams(p["gate_l.w"], float(p["gate_l.b"][0]), p["gate_a.w"], float(p["gate_a.b"][0]))
    fuse = FusionParams(p["fuse.W_l"].T, p["fuse.W_a"].T, p["fuse.b"])
    return gates, fuse


def set_doc_fusion_parts(net, gates, fuse):
    p = net.params
    p["gate_l.w"] = np.asarray(gates.W_hl, dtype=np.float64).copy()
    p["gate_l.b"] = np.array([gates.b_l], dtype=np.float64)
    p["gate_a.w"] = np.asarray(gates.W_ha, dtype=np.float64).copy()
    p["gate_a.b"] = np.array([gates.b_a], dtype=np.float64)
    for name, W in (("fuse.W_l", fuse.W_l), ("fuse.W_a", fuse.W_a)):
        W = np.asarray(W, dtype=np.float64).T
        if W.shape != p[name].shape:
            raise ValueError(f"{name} has shape {W.T.shape}, expected {p[name].T.shape}")
        p[name] = W.copy()
    p["fuse.b"] = np.asarray(fuse.b_la, dtype=np.float64).copy()


def seg_attention_parts(net):
    p = net.params
    return SegAttentionParams(p["gate.w"], float(p["gate.b"][0]), p["proj.W"].T, p["proj.b"])


def set_seg_attention_parts(net, params):
    p = net.params
    p["gate.w"] = np.asarray(params.W_h, dtype=np.float64).copy()
    p["gate.b"] = np.array([params.b], dtype=np.float64)
    p["proj.W"] = np.asarray(params.W, dtype=np.float64).T.copy()
    p["proj.b"] = np.asarray(params.b_la, dtype=np.float64).copy()


# -------------------------------------------------------------- forward ops


def unimodal_doc_rep(segment_vectors, net):
    """Document vector (penultimate layer) and attention weights over segments."""
    if len(segment_vectors) == 0:
        raise ValueError("document has no segments")
    seq = np.array([getattr(v, "values", v) for v in segment_vectors], dtype=np.float64)
    out = net.forward([seq])
    return out["penultimate"][0], out["attention"][0, : len(seq)]


def doc_fusion_forward(L_doc, A_doc, net, gates=None, fuse=None):
    """Fused embedding for one document plus the two modality gates.

    ``gates``/``fuse`` override the network's own gate and fusion weights
    (the two LSTMs are always taken from ``net``).  A network built with
    ``precomputed=True`` takes the two state vectors h_l, h_a directly.
    """
    if len(L_doc) == 0 or len(A_doc) == 0:
        raise ValueError("both modality sequences must be nonempty")
    if gates is not None or fuse is not None:
        net = net.copy()
        g0, f0 = doc_fusion_parts(net)
        set_doc_fusion_parts(net, gates or g0, fuse or f0)
    if net.arch.get("precomputed"):
        pair = (np.ravel(getattr(L_doc, "values", L_doc)), np.ravel(getattr(A_doc, "values", A_doc)))
    else:
        pair = (np.atleast_2d(L_doc), np.atleast_2d(A_doc))
    out = net.forward([pair])
    return BimodalEmbedding(out["penultimate"][0],
                            {"language": float(out["w_l"][0]), "acoustic": float(out["w_a"][0])})


def seg_fusion_forward(segments, net, params=None):
    """Per-segment fused vectors, their gates and the pooled document vector.

    ``segments`` is a sequence of (text vector, audio vector) pairs.
    Returns ``(per_segment, pooled)`` where ``per_segment`` is a list of
    BimodalEmbedding and ``pooled`` a BimodalEmbedding whose gates hold the
    normalised weights.
    """
    if len(segments) == 0:
        raise ValueError("document has no segments")
    if params is not None:
        net = net.copy()
        set_seg_attention_parts(net, params)
    Lt = np.array([getattr(t, "values", t) for t, _ in segments], dtype=np.float64)
    At = np.array([getattr(a, "values", a) for _, a in segments], dtype=np.float64)
    out = net.forward([(Lt, At)])
    w = out["gates"][0, : len(segments)]
    per = [BimodalEmbedding(out["h_seg"][0, i], {"attention": float(w[i])}) for i in range(len(segments))]
    pooled = BimodalEmbedding(out["penultimate"][0], {"weights": (w / w.sum()).tolist()})
    return per, pooled


def predict_disorder(h_la, head_w, head_b):
    """sigmoid(head_w . h_la + head_b)."""
    h = getattr(h_la, "h_la", h_la)
    return float(sigmoid(np.dot(np.ravel(head_w), h) + float(np.ravel(head_b)[0])))


# -------------------------------------------------------------- audio compressor


class AudioSegmentCompressor:
    """12-label multi-label LSTM whose penultimate layer is the compressed
    audio segment encoding."""

    def __init__(self, net):
        self.net = net.copy()
        for v in self.net.params.values():
            v.setflags(write=False)

    @property
    def dim(self):
        return self.net.arch["emb_dim"]

    def __call__(self, seqs, batch_size=512):
        out = [self.net.penultimate(seqs[k : k + batch_size]) for k in range(0, len(seqs), batch_size)]
        return np.concatenate(out, axis=0)

    def label_scores(self, seqs):
        return self.net.predict_proba(seqs)


def train_audio_compressor(seqs, label_vectors, cfg=TrainConfig(), dim=64, hidden_dim=64):
    """Train on 12-dim 0/1 label vectors; ``seqs`` are per-segment sequences."""
    if len(seqs) == 0:
        raise ValueError("no labelled segments to train the compressor")
    Y = np.asarray(label_vectors, dtype=np.float64)
    if Y.ndim != 2 or Y.shape[1] != len(SEGMENT_LABEL_NAMES):
        raise ValueError(f"expected {len(SEGMENT_LABEL_NAMES)} label columns")
    net = LstmClassifier(np.atleast_2d(seqs[0]).shape[1], hidden_dim=hidden_dim, emb_dim=dim,
                         head="sigmoid", n_out=Y.shape[1], seed=cfg.seed)
    result = train(net, list(seqs), Y, cfg)
    return AudioSegmentCompressor(net), result


def audio_segment_compress(compressor, features):
    """Encode one segment (a feature sequence or a single vector)."""
    if compressor is None:
        raise ValueError("compressor is untrained")
    seq = np.atleast_2d(getattr(features, "values", features))
    return compressor([seq])[0]


# -------------------------------------------------------------- builders


def make_doc_net(input_dim, hidden_dim=64, doc_dim=64, seed=0):
    return AttentionLstm(input_dim, hidden_dim=hidden_dim, doc_dim=doc_dim, seed=seed)


def make_fusion_net(strategy, text_dim, audio_dim, hidden_dim=64, fused_dim=64, seed=0,
                    precomputed=False):
    if strategy == "document":
        return DocFusionNet(text_dim, audio_dim, hidden_text=hidden_dim, hidden_audio=hidden_dim,
                            fused_dim=fused_dim, precomputed=precomputed, seed=seed)
    if strategy == "segment":
        return SegFusionNet(text_dim, audio_dim, hidden_dim=hidden_dim, fused_dim=fused_dim, seed=seed)
    raise ValueError(f"unknown fusion strategy {strategy!r}")
