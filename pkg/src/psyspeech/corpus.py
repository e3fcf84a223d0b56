"""Segment/document data model, JSONL corpus I/O, statistics, label count
matrices and a seeded synthetic corpus generator with planted signal."""

import json
import math
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .dsp import AudioBuffer, read_wav

SCHEMA_VERSION = "1"

SUBJECTIVITY = ("objective", "subjective")
SENTIMENT = ("negative", "neutral", "positive")
EMOTION = ("anger", "fear", "joy", "sadness", "neutral")
SEGMENT_FLAGS = ("cohesion", "rumination", "overinclusiveness", "worry", "criticism")
DISORDERS = ("control", "depression", "bipolar", "schizophrenia")
RATINGS = ("affect", "warmth", "overprotection", "cohesion", "criticism")

# 1 + 1 + 5 (one-hot emotion) + 5 flags
SEGMENT_LABEL_NAMES = (
    ("subjective", "positive_sentiment")
    + tuple(f"emotion_{e}" for e in EMOTION)
    + SEGMENT_FLAGS
)


class CorpusError(ValueError):
    """Raised for malformed corpus files; the message names line and field."""


@dataclass(frozen=True)
class SegmentLabels:
    subjectivity: str
    sentiment: str
    emotion: str
    cohesion: bool = False
    rumination: bool = False
    overinclusiveness: bool = False
    worry: bool = False
    criticism: bool = False

    def __post_init__(self):
        _enum("subjectivity", self.subjectivity, SUBJECTIVITY)
        _enum("sentiment", self.sentiment, SENTIMENT)
        _enum("emotion", self.emotion, EMOTION)
        for f in SEGMENT_FLAGS:
            if not isinstance(getattr(self, f), bool):
                raise CorpusError(f"field {f!r} must be a boolean")

    def vector(self):
        """12-dim 0/1 target used by the audio segment compressor."""
        v = [self.subjectivity == "subjective", self.sentiment == "positive"]
        v += [self.emotion == e for e in EMOTION]
        v += [getattr(self, f) for f in SEGMENT_FLAGS]
        return np.array(v, dtype=np.float64)

    def to_json(self):
        return {
            "subjectivity": self.subjectivity,
            "sentiment": self.sentiment,
            "emotion": self.emotion,
            **{f: getattr(self, f) for f in SEGMENT_FLAGS},
        }


@dataclass(frozen=True)
class DocumentLabels:
    disorder: str
    affect: int = 3
    warmth: int = 3
    overprotection: int = 3
    cohesion: int = 3
    criticism: int = 3

    def __post_init__(self):
        _enum("disorder", self.disorder, DISORDERS)
        for r in RATINGS:
            v = getattr(self, r)
            if isinstance(v, bool) or not isinstance(v, int) or not 1 <= v <= 5:
                raise CorpusError(f"field {r!r} must be an integer rating in [1, 5], got {v!r}")

    def to_json(self):
        return {"disorder": self.disorder, **{r: getattr(self, r) for r in RATINGS}}


@dataclass(frozen=True)
class SegmentRecord:
    segment_id: str
    tokens: tuple = ()
    audio_path: str = None
    duration_s: float = 0.0
    labels: SegmentLabels = None

    def __post_init__(self):
        object.__setattr__(self, "tokens", tuple(self.tokens))
        if not self.segment_id:
            raise CorpusError("field 'segment_id' must be nonempty")
        if not self.tokens and not self.audio_path:
            raise CorpusError(f"segment {self.segment_id}: needs tokens or audio")
        if self.duration_s < 0:
            raise CorpusError(f"segment {self.segment_id}: field 'duration_s' must be >= 0")
        if self.audio_path and not self.duration_s > 0:
            raise CorpusError(f"segment {self.segment_id}: field 'duration_s' must be > 0 with audio")

    def to_json(self):
        return {
            "segment_id": self.segment_id,
            "tokens": list(self.tokens),
            "audio_path": self.audio_path,
            "duration_s": self.duration_s,
            "labels": None if self.labels is None else self.labels.to_json(),
        }


@dataclass(frozen=True)
class DocumentRecord:
    document_id: str
    subject_id: str
    family_id: str
    segments: tuple
    labels: DocumentLabels

    def __post_init__(self):
        object.__setattr__(self, "segments", tuple(self.segments))
        if not self.document_id:
            raise CorpusError("field 'document_id' must be nonempty")
        if not self.family_id:
            raise CorpusError(f"document {self.document_id}: field 'family_id' must be nonempty")
        if not self.segments:
            raise CorpusError(f"document {self.document_id}: field 'segments' must be nonempty")

    def to_json(self):
        return {
            "document_id": self.document_id,
            "subject_id": self.subject_id,
            "family_id": self.family_id,
            "labels": self.labels.to_json(),
            "segments": [s.to_json() for s in self.segments],
        }


@dataclass(frozen=True)
class CorpusManifest:
    documents: tuple = ()
    schema_version: str = SCHEMA_VERSION
    base_dir: str = field(default=".", compare=False)

    def __post_init__(self):
        object.__setattr__(self, "documents", tuple(self.documents))
        seen = set()
        for d in self.documents:
            if d.document_id in seen:
                raise CorpusError(f"duplicate document_id {d.document_id!r}")
            seen.add(d.document_id)

    def __len__(self):
        return len(self.documents)

    def families(self):
        out = {}
        for d in self.documents:
            out.setdefault(d.family_id, []).append(d.document_id)
        return out

    def segments(self):
        for d in self.documents:
            yield from d.segments

    def load_audio(self, segment):
        return resolve_audio(segment.audio_path, self.base_dir)


def _enum(name, value, allowed):
    if value not in allowed:
        raise CorpusError(f"field {name!r}: {value!r} not in {list(allowed)}")


# ---------------------------------------------------------------- JSONL io


def _segment_from_json(obj):
    if not isinstance(obj, dict):
        raise CorpusError("segment must be an object")
    lab = obj.get("labels")
    labels = None
    if lab is not None:
        if not isinstance(lab, dict):
            raise CorpusError("field 'labels' must be an object")
        labels = SegmentLabels(
            subjectivity=lab.get("subjectivity"),
            sentiment=lab.get("sentiment"),
            emotion=lab.get("emotion"),
            **{f: lab.get(f, False) for f in SEGMENT_FLAGS},
        )
    tokens = obj.get("tokens", [])
    if not isinstance(tokens, list) or not all(isinstance(t, str) for t in tokens):
        raise CorpusError("field 'tokens' must be a list of strings")
    dur = obj.get("duration_s", 0.0)
    if isinstance(dur, bool) or not isinstance(dur, (int, float)):
        raise CorpusError("field 'duration_s' must be a number")
    return SegmentRecord(
        segment_id=obj.get("segment_id", ""),
        tokens=tokens,
        audio_path=obj.get("audio_path"),
        duration_s=float(dur),
        labels=labels,
    )


def document_from_json(obj):
    if not isinstance(obj, dict):
        raise CorpusError("document must be a JSON object")
    lab = obj.get("labels")
    if not isinstance(lab, dict):
        raise CorpusError("field 'labels' must be an object")
    for r in ("disorder",) + RATINGS:
        if r not in lab:
            raise CorpusError(f"missing field {r!r}")
    labels = DocumentLabels(disorder=lab["disorder"], **{r: lab[r] for r in RATINGS})
    segs = obj.get("segments")
    if not isinstance(segs, list):
        raise CorpusError("field 'segments' must be a list")
    segments = []
    for k, s in enumerate(segs):
        try:
            segments.append(_segment_from_json(s))
        except CorpusError as exc:
            raise CorpusError(f"segments[{k}]: {exc}") from None
    return DocumentRecord(
        document_id=obj.get("document_id", ""),
        subject_id=obj.get("subject_id", ""),
        family_id=obj.get("family_id", ""),
        segments=segments,
        labels=labels,
    )


def load_corpus(path):
    """Parse and validate a JSONL corpus (one document per line)."""
    path = Path(path)
    docs = []
    seen = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusError(f"{path}:{lineno}: parse error: {exc.msg}") from None
            try:
                doc = document_from_json(obj)
            except CorpusError as exc:
                raise CorpusError(f"{path}:{lineno}: {exc}") from None
            if doc.document_id in seen:
                raise CorpusError(
                    f"{path}:{lineno}: duplicate document_id {doc.document_id!r} "
                    f"(first on line {seen[doc.document_id]})"
                )
            seen[doc.document_id] = lineno
            docs.append(doc)
    return CorpusManifest(tuple(docs), SCHEMA_VERSION, str(path.parent))


def dumps_corpus(corpus):
    return "".join(
        json.dumps(d.to_json(), ensure_ascii=False, separators=(",", ":")) + "\n"
        for d in corpus.documents
    )


def save_corpus(corpus, path):
    from .io import atomic_write_text

    atomic_write_text(path, dumps_corpus(corpus))


# ---------------------------------------------------------------- stats


def _segment_value_counts(corpus):
    c = Counter()
    for s in corpus.segments():
        if s.labels is None:
            continue
        c[("subjectivity", s.labels.subjectivity)] += 1
        c[("sentiment", s.labels.sentiment)] += 1
        c[("emotion", s.labels.emotion)] += 1
        for f in SEGMENT_FLAGS:
            c[(f, getattr(s.labels, f))] += 1
    return c


def corpus_stats(corpus):
    """Rows of (attribute, value) in the layout of a data statistics table.

    "Total number of subjects" counts recorded samples (documents); unique
    speakers and families are listed separately.
    """
    if len(corpus) == 0:
        raise CorpusError("corpus is empty")
    segs = list(corpus.segments())
    with_audio = [s.duration_s for s in segs if s.audio_path]
    c = _segment_value_counts(corpus)
    rows = [
        ("Total number of subjects", len(corpus)),
        ("Unique speakers", len({d.subject_id for d in corpus.documents})),
        ("Unique families", len({d.family_id for d in corpus.documents})),
        ("Total number of segments", len(segs)),
        ("Average word count in segments", sum(len(s.tokens) for s in segs) / len(segs)),
        ("Average length of audio segments (seconds)",
         sum(with_audio) / len(with_audio) if with_audio else 0.0),
        ("Number of objective segments", c[("subjectivity", "objective")]),
        ("Number of subjective segments", c[("subjectivity", "subjective")]),
        ("Number of segments with positive sentiment", c[("sentiment", "positive")]),
        ("Number of segments with negative sentiment", c[("sentiment", "negative")]),
        ("Number of segments with neutral sentiment", c[("sentiment", "neutral")]),
    ]
    for e in EMOTION:
        rows.append((f"Number of segments with {e} emotion", c[("emotion", e)]))
    names = {"cohesion": "cohesive", "rumination": "ruminated", "overinclusiveness": "overinclusive",
             "worry": "worry", "criticism": "criticism"}
    for f in SEGMENT_FLAGS:
        rows.append((f"Number of {names[f]} segments", c[(f, True)]))
    for d in DISORDERS:
        rows.append((f"Number of {d} documents", sum(doc.labels.disorder == d for doc in corpus.documents)))
    return rows


def write_stats_csv(rows, path):
    from .io import write_csv

    write_csv(path, ["attribute", "count"], rows)


SEGMENT_HEATMAP_ROWS = ("subjectivity", "sentiment", "emotion") + SEGMENT_FLAGS
SEGMENT_HEATMAP_COLS = SUBJECTIVITY + ("negative", "neutral", "positive", "anger", "fear", "joy", "sadness",
                                       "false", "true")
DOCUMENT_HEATMAP_ROWS = RATINGS
DOCUMENT_HEATMAP_COLS = ("1", "2", "3", "4", "5")


def label_heatmap(corpus, level="segment"):
    """Label-value count matrix; returns (row_names, col_names, counts).

    Segment level: rows are the label fields in SEGMENT_HEATMAP_ROWS and
    columns the value names in SEGMENT_HEATMAP_COLS ("neutral" is shared by
    the sentiment and emotion rows; booleans use "false"/"true").
    Document level: rows are the five ratings, columns the values 1..5.
    """
    if len(corpus) == 0:
        raise CorpusError("corpus is empty")
    if level == "segment":
        rows, cols = SEGMENT_HEATMAP_ROWS, SEGMENT_HEATMAP_COLS
        M = np.zeros((len(rows), len(cols)), dtype=np.int64)
        for (f, v), n in _segment_value_counts(corpus).items():
            name = ("true" if v else "false") if isinstance(v, bool) else v
            M[rows.index(f), cols.index(name)] += n
    elif level == "document":
        rows, cols = DOCUMENT_HEATMAP_ROWS, DOCUMENT_HEATMAP_COLS
        M = np.zeros((len(rows), len(cols)), dtype=np.int64)
        for d in corpus.documents:
            for i, r in enumerate(rows):
                M[i, getattr(d.labels, r) - 1] += 1
    else:
        raise ValueError(f"unknown level {level!r}")
    return list(rows), list(cols), M


def write_heatmap_csv(heatmap, path):
    from .io import write_csv

    rows, cols, M = heatmap
    write_csv(path, ["label"] + list(cols), [[r] + [int(v) for v in M[i]] for i, r in enumerate(rows)])


# ---------------------------------------------------------------- synthetic audio

CLASS_TONES_HZ = {"control": 500.0, "depression": 900.0, "bipolar": 1300.0, "schizophrenia": 1700.0}
EMOTION_PITCH_SCALE = {"anger": 1.2, "fear": 1.1, "joy": 1.3, "sadness": 0.85, "neutral": 1.0}


def synth_audio_uri(sr, duration_s, f0, tone_hz, seed, tone_amp=0.2, voice_amp=0.4):
    return (f"synth:sr={int(sr)};dur={duration_s!r};f0={f0!r};tone={tone_hz!r};"
            f"tamp={tone_amp!r};vamp={voice_amp!r};seed={int(seed)}")


def render_synth(uri):
    """Deterministically render a ``synth:`` audio reference.

    The signal is a band-limited sawtooth voice at ``f0`` plus an optional
    sine tone and a little white noise.
    """
    params = dict(item.split("=", 1) for item in uri[len("synth:"):].split(";"))
    sr = int(params["sr"])
    n = int(round(float(params["dur"]) * sr))
    f0 = float(params["f0"])
    tone = float(params["tone"])
    rng = np.random.default_rng(int(params["seed"]))
    t = np.arange(n) / sr
    voice = np.zeros(n)
    for k in range(1, int((sr / 2) // f0) + 1):
        voice += np.sin(2 * np.pi * k * f0 * t) / k
    voice *= float(params["vamp"]) / 1.8
    x = voice + 0.01 * rng.standard_normal(n)
    if tone > 0:
        x += float(params["tamp"]) * np.sin(2 * np.pi * tone * t + rng.uniform(0, 2 * np.pi))
    return AudioBuffer(np.clip(x, -1.0, 1.0), sr)


def resolve_audio(ref, base_dir="."):
    if ref is None:
        raise ValueError("segment has no audio")
    if ref.startswith("synth:"):
        return render_synth(ref)
    p = Path(ref)
    if not p.is_absolute():
        p = Path(base_dir) / p
    return read_wav(p)


# ---------------------------------------------------------------- synthetic corpus

FILLER_VOCAB = tuple(f"w{k:03d}" for k in range(240))
EMOTION_WORDS = {
    "anger": ("angry", "furious", "annoyed"),
    "fear": ("scared", "panic", "afraid"),
    "joy": ("happy", "elated", "glad"),
    "sadness": ("sad", "unhappy", "gloomy"),
}
CLASS_MARKERS = {d: tuple(f"{d[:3]}_{k}" for k in range(6)) for d in DISORDERS}


@dataclass(frozen=True)
class SynthConfig:
    n_families: int = 40
    docs_per_family: tuple = (1, 3)
    segments_per_doc: tuple = (3, 6)
    tokens_per_segment: tuple = (6, 12)
    class_priors: tuple = (0.355, 0.41, 0.182, 0.053)  # control, depression, bipolar, schizophrenia
    text_strength: float = 0.8
    audio_strength: float = 0.8
    sample_rate: int = 8000
    duration_s: tuple = (0.4, 0.8)
    with_audio: bool = True

    def __post_init__(self):
        p = np.asarray(self.class_priors, dtype=np.float64)
        if p.shape != (4,) or np.any(p < 0) or abs(p.sum() - 1.0) > 1e-9:
            raise ValueError("class_priors must be 4 nonnegative values summing to 1")
        for name in ("text_strength", "audio_strength"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")
        if self.n_families < 1:
            raise ValueError("n_families must be >= 1")


def _synth_segment_labels(rng):
    emotion = EMOTION[rng.choice(5, p=[0.074, 0.046, 0.265, 0.065, 0.55])]
    if emotion == "joy":
        sentiment = "positive"
    elif emotion == "neutral":
        sentiment = SENTIMENT[rng.choice(3, p=[0.1, 0.75, 0.15])]
    else:
        sentiment = "negative"
    subjective = emotion != "neutral" or rng.random() < 0.4
    return SegmentLabels(
        subjectivity="subjective" if subjective else "objective",
        sentiment=sentiment,
        emotion=emotion,
        cohesion=bool(rng.random() < 0.165),
        rumination=bool(rng.random() < 0.013),
        overinclusiveness=bool(rng.random() < 0.027),
        worry=bool(rng.random() < (0.4 if emotion == "fear" else 0.06)),
        criticism=bool(rng.random() < (0.4 if emotion == "anger" else 0.08)),
    )


def synth_corpus(config=SynthConfig(), seed=0):
    """Generate a corpus whose disorder labels are planted in text and audio.

    Each document independently carries the text signal with probability
    ``text_strength`` (class-specific marker tokens in its segments) and the
    audio signal with probability ``audio_strength`` (a class-specific tone
    mixed into every segment).  Documents without a channel's signal get
    no markers / no tone, so strength 0 means the channel is independent
    of the label.  Segment emotion labels are matched by emotion words in
    the text and by a pitch shift in the audio.
    """
    rng = np.random.default_rng(seed)
    priors = np.asarray(config.class_priors, dtype=np.float64)
    docs = []
    for fam in range(config.n_families):
        family_id = f"F{fam:04d}"
        n_docs = int(rng.integers(config.docs_per_family[0], config.docs_per_family[1] + 1))
        n_subjects = 1 if n_docs == 1 else int(rng.integers(1, 3))
        subjects = []
        for s in range(n_subjects):
            disorder = DISORDERS[rng.choice(4, p=priors)]
            subjects.append((f"{family_id}-P{s}", disorder, float(rng.uniform(100.0, 190.0))))
        for d in range(n_docs):
            subject_id, disorder, f0 = subjects[d % n_subjects]
            doc_id = f"{subject_id}-D{d}"
            text_on = rng.random() < config.text_strength
            audio_on = rng.random() < config.audio_strength
            n_seg = int(rng.integers(config.segments_per_doc[0], config.segments_per_doc[1] + 1))
            segments = []
            for k in range(n_seg):
                labels = _synth_segment_labels(rng)
                n_tok = int(rng.integers(config.tokens_per_segment[0], config.tokens_per_segment[1] + 1))
                tokens = [FILLER_VOCAB[i] for i in rng.integers(0, len(FILLER_VOCAB), size=n_tok)]
                if labels.emotion != "neutral":
                    words = EMOTION_WORDS[labels.emotion]
                    tokens.insert(int(rng.integers(0, len(tokens) + 1)), words[rng.integers(len(words))])
                if text_on:
                    markers = CLASS_MARKERS[disorder]
                    for _ in range(int(rng.integers(1, 3))):
                        tokens.insert(int(rng.integers(0, len(tokens) + 1)), markers[rng.integers(len(markers))])
                audio_path, duration = None, 0.0
                if config.with_audio:
                    duration = round(float(rng.uniform(*config.duration_s)), 3)
                    tone = CLASS_TONES_HZ[disorder] if audio_on else 0.0
                    seg_f0 = round(f0 * EMOTION_PITCH_SCALE[labels.emotion], 3)
                    audio_path = synth_audio_uri(config.sample_rate, duration, seg_f0, tone,
                                                 int(rng.integers(0, 2**31)))
                segments.append(SegmentRecord(f"{doc_id}-s{k:03d}", tuple(tokens), audio_path,
                                              duration, labels))
            ratings = {r: int(rng.integers(1, 6)) for r in RATINGS}
            docs.append(DocumentRecord(doc_id, subject_id, family_id, tuple(segments),
                                       DocumentLabels(disorder, **ratings)))
    return CorpusManifest(tuple(docs))
