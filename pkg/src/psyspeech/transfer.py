"""Emotion-specific segment embeddings by transfer learning.

A network is trained on an auxiliary emotion-labelled corpus, frozen, and
its softmax layer dropped; the last dense layer's activations become the
segment's emotion embedding.  Three branches exist: text (token-vector
sequences), COVAREP-style frame features, and Mel spectrograms (CNN+LSTM).
"""

import json
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import corpus as corpus_mod
from . import dsp
from .embed import FeatureVector, stub_encode
from .nn import ConvLstmClassifier, LstmClassifier, TrainConfig, train
from .nn import serialize

EMOTIONS = ("anger", "fear", "joy", "sadness")
ALIASES = {"happiness": "joy", "happy": "joy"}
DEFAULT_EMOTION_DIM = 32


def canonical_emotion(label):
    label = ALIASES.get(label, label)
    if label not in EMOTIONS:
        raise ValueError(f"emotion {label!r} not in {EMOTIONS}")
    return label


@dataclass
class EmotionCorpus:
    """Sequences (each a 2-D array) with labels from the 4-emotion set."""

    items: list
    labels: list

    def __post_init__(self):
        if len(self.items) != len(self.labels):
            raise ValueError("items and labels differ in length")
        self.labels = [canonical_emotion(l) for l in self.labels]
        self.items = [np.atleast_2d(np.asarray(x, dtype=np.float64)) for x in self.items]

    def __len__(self):
        return len(self.items)

    def targets(self):
        return np.array([EMOTIONS.index(l) for l in self.labels])

    def split(self, frac, seed=0):
        idx = np.random.default_rng(seed).permutation(len(self))
        cut = int(round(frac * len(self)))
        pick = lambda ids: EmotionCorpus([self.items[i] for i in ids], [self.labels[i] for i in ids])
        return pick(idx[:cut]), pick(idx[cut:])


class Standardizer:
    """Per-column z-scoring fitted on stacked rows; ``log`` applies log(eps+x) first."""

    def __init__(self, mean, std, log=False):
        self.mean = np.asarray(mean, dtype=np.float64)
        self.std = np.asarray(std, dtype=np.float64)
        self.log = bool(log)

    @classmethod
    def fit(cls, arrays, log=False):
        rows = np.concatenate([np.atleast_2d(a) for a in arrays], axis=0)
        if log:
            rows = np.log(dsp.LOG_EPS + rows)
        std = rows.std(axis=0)
        return cls(rows.mean(axis=0), np.where(std > 1e-12, std, 1.0), log)

    def __call__(self, a):
        a = np.atleast_2d(np.asarray(a, dtype=np.float64))
        if self.log:
            a = np.log(dsp.LOG_EPS + a)
        return (a - self.mean) / self.std

    def to_dict(self):
        return {"mean": self.mean.tolist(), "std": self.std.tolist(), "log": self.log}

    @classmethod
    def from_dict(cls, d):
        return cls(d["mean"], d["std"], d.get("log", False))


class EmotionEncoder:
    """Frozen emotion network.  ``encode`` returns penultimate activations;
    ``predict_proba`` still uses the (otherwise removed) softmax head."""

    def __init__(self, net, scaler, branch, pretrained=None):
        self.net = net.copy()
        for v in self.net.params.values():
            v.setflags(write=False)
        self.scaler = scaler
        self.branch = branch
        self.pretrained = pretrained  # archived snapshot before fine-tuning

    @property
    def dim(self):
        return self.net.arch["emb_dim"]

    def _prep(self, seqs):
        return [self.scaler(s) for s in seqs]

    def encode(self, seqs, batch_size=256):
        out = []
        for k in range(0, len(seqs), batch_size):
            out.append(self.net.penultimate(self._prep(seqs[k : k + batch_size])))
        return np.concatenate(out, axis=0) if out else np.zeros((0, self.dim))

    def predict_proba(self, seqs, batch_size=256):
        out = []
        for k in range(0, len(seqs), batch_size):
            out.append(self.net.predict_proba(self._prep(seqs[k : k + batch_size])))
        return np.concatenate(out, axis=0)

    def accuracy(self, aux):
        pred = self.predict_proba(aux.items).argmax(axis=1)
        return float((pred == aux.targets()).mean())

    def to_dict(self):
        d = serialize.network_to_dict(self.net)
        d["encoder"] = {"branch": self.branch, "scaler": self.scaler.to_dict()}
        return d

    @classmethod
    def from_dict(cls, d):
        net = serialize.network_from_dict(d)
        enc = d["encoder"]
        return cls(net, Standardizer.from_dict(enc["scaler"]), enc["branch"])

    def save(self, path):
        from .io import atomic_write_text

        atomic_write_text(path, json.dumps(self.to_dict(), sort_keys=True) + "\n")

    @classmethod
    def load(cls, path):
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def _check_classes(aux):
    missing = [e for e in EMOTIONS if e not in set(aux.labels)]
    if missing:
        warnings.warn(f"auxiliary corpus has no items for {missing}", stacklevel=3)


def _fit(net, aux, scaler, cfg):
    if len(aux) == 0:
        raise ValueError("auxiliary corpus is empty")
    _check_classes(aux)
    result = train(net, [scaler(x) for x in aux.items], aux.targets(), cfg)
    return result


def train_text_emotion(aux, cfg=TrainConfig(), emotion_dim=DEFAULT_EMOTION_DIM, hidden_dim=32):
    """Aux items are per-token subword-vector sequences."""
    scaler = Standardizer.fit(aux.items)
    net = LstmClassifier(aux.items[0].shape[1], hidden_dim=hidden_dim, emb_dim=emotion_dim,
                         head="softmax", n_out=4, seed=cfg.seed)
    result = _fit(net, aux, scaler, cfg)
    return EmotionEncoder(net, scaler, "text"), result


def train_audio_emotion_covarep(aux, cfg=TrainConfig(), emotion_dim=DEFAULT_EMOTION_DIM, hidden_dim=16,
                                finetune=None, finetune_cfg=None, trainable=None):
    """Aux items are frames x 17 COVAREP-style matrices.

    ``finetune`` is an optional target-domain EmotionCorpus; ``trainable``
    limits which parameters the fine-tuning step may change.  The
    pre-fine-tuning snapshot is kept on ``encoder.pretrained``.
    """
    scaler = Standardizer.fit(aux.items)
    net = LstmClassifier(aux.items[0].shape[1], hidden_dim=hidden_dim, emb_dim=emotion_dim,
                         head="softmax", n_out=4, seed=cfg.seed)
    result = _fit(net, aux, scaler, cfg)
    pretrained = EmotionEncoder(net, scaler, "covarep")
    if finetune is None or len(finetune) == 0:
        return pretrained, result
    tuned = net.copy()
    train(tuned, [scaler(x) for x in finetune.items], finetune.targets(),
          finetune_cfg or cfg, trainable=trainable)
    return EmotionEncoder(tuned, scaler, "covarep", pretrained=pretrained), result


def train_audio_emotion_spectrogram(aux, cfg=TrainConfig(), emotion_dim=DEFAULT_EMOTION_DIM,
                                    hidden_dim=16, channels=4, kernel=(3, 3), stride=(1, 2)):
    """Aux items are (frames x n_mels) Mel power spectrograms; the network
    sees log power standardised per Mel band."""
    scaler = Standardizer.fit(aux.items, log=True)
    net = ConvLstmClassifier(aux.items[0].shape[1], channels=channels, kernel=kernel, stride=stride,
                             hidden_dim=hidden_dim, emb_dim=emotion_dim, head="softmax", n_out=4,
                             seed=cfg.seed)
    result = _fit(net, aux, scaler, cfg)
    return EmotionEncoder(net, scaler, "spectrogram"), result


def emotion_audio_concat(e_cov, e_spec):
    return FeatureVector.concat([("emotion_covarep", e_cov), ("emotion_spectrogram", e_spec)])


# ---------------------------------------------------------------- aux corpora

EMOTION_TONES_HZ = {"anger": 2200.0, "fear": 2600.0, "joy": 3000.0, "sadness": 3400.0}


def text_sequence(tokens, subword_table=None, dim=100):
    """Per-token subword vectors (stub encoder for tokens not in the table)."""
    if subword_table is not None:
        return np.array([subword_table.lookup(t) for t in tokens])
    return np.array([stub_encode("subword", t, dim) for t in tokens])


def synth_text_emotion(n, seed=0, dim=100, subword_table=None):
    """Token sequences of filler words plus one or two emotion words of the label."""
    rng = np.random.default_rng(seed)
    items, labels, tokens_out = [], [], []
    for _ in range(n):
        emo = EMOTIONS[rng.integers(4)]
        toks = [corpus_mod.FILLER_VOCAB[i] for i in rng.integers(0, len(corpus_mod.FILLER_VOCAB),
                                                                size=rng.integers(5, 11))]
        words = corpus_mod.EMOTION_WORDS[emo]
        for _ in range(int(rng.integers(1, 3))):
            toks.insert(int(rng.integers(0, len(toks) + 1)), words[rng.integers(len(words))])
        tokens_out.append(toks)
        items.append(text_sequence(toks, subword_table, dim))
        labels.append(emo)
    return EmotionCorpus(items, labels), tokens_out


def synth_emotion_audio(n, seed=0, sr=8000, duration=(0.4, 0.7)):
    """Audio references whose pitch shift and added tone depend on the emotion."""
    rng = np.random.default_rng(seed)
    refs, labels = [], []
    for _ in range(n):
        emo = EMOTIONS[rng.integers(4)]
        f0 = float(rng.uniform(100, 190)) * corpus_mod.EMOTION_PITCH_SCALE[emo]
        dur = round(float(rng.uniform(*duration)), 3)
        refs.append(corpus_mod.synth_audio_uri(sr, dur, round(f0, 3), EMOTION_TONES_HZ[emo],
                                               int(rng.integers(0, 2**31))))
        labels.append(emo)
    return refs, labels


def audio_emotion_corpora(refs, labels, frame_cfg=dsp.FrameConfig(), n_mels=26):
    """Build the COVAREP-feature and spectrogram corpora from audio references."""
    cov, spec = [], []
    for ref in refs:
        a = dsp.analyze_segment(corpus_mod.resolve_audio(ref), frame_cfg, n_mels)
        cov.append(a.covarep)
        spec.append(a.mel.matrix)
    return EmotionCorpus(cov, labels), EmotionCorpus(spec, labels)


# ---------------------------------------------------------------- files


def load_emotion_corpus(path, branch, subword_table=None, frame_cfg=dsp.FrameConfig(), n_mels=26):
    """Read a JSONL EmotionCorpus.

    Each line has ``label`` and one of: ``features`` (CSV of a 2-D feature
    sequence, path relative to the JSONL file), ``tokens`` (text branch) or
    ``audio`` (WAV path or ``synth:`` reference; audio branches).
    """
    path = Path(path)
    items, labels = [], []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                label = canonical_emotion(obj["label"])
            except (json.JSONDecodeError, KeyError, ValueError) as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from None
            if "features" in obj:
                items.append(read_feature_csv(path.parent / obj["features"])[0])
            elif "tokens" in obj and branch == "text":
                items.append(text_sequence(obj["tokens"], subword_table))
            elif "audio" in obj and branch in ("covarep", "spectrogram"):
                a = dsp.analyze_segment(corpus_mod.resolve_audio(obj["audio"], path.parent), frame_cfg, n_mels)
                items.append(a.covarep if branch == "covarep" else a.mel.matrix)
            else:
                raise ValueError(f"{path}:{lineno}: no usable input for branch {branch!r}")
            labels.append(label)
    return EmotionCorpus(items, labels)


def write_feature_csv(path, matrix, columns):
    from .io import write_csv

    write_csv(path, list(columns), [list(map(float, row)) for row in np.atleast_2d(matrix)])


def read_feature_csv(path):
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
        rows = [[float(v) for v in line.split(",")] for line in fh if line.strip()]
    return np.array(rows, dtype=np.float64).reshape(-1, len(header)), header
