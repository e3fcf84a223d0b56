"""Fold-independent per-segment features for an experiment run.

Text segments: ``[lm | subword | docvec | emotion_text]``.  Audio
segments: ``[wavenet | vggish | dsp | emotion_audio]``.  Encoder tables
come from embedding files when configured and from the stub encoder
otherwise; the emotion encoders are trained here on auxiliary corpora.
"""

from dataclasses import dataclass, field

import numpy as np

from .. import dsp, transfer
from ..corpus import SEGMENT_LABEL_NAMES, resolve_audio
from ..embed import EmbeddingSpec, EmbeddingTable, concat_segment_audio, concat_segment_text, \
    load_embedding_file, segment_vector
from ..nn import TrainConfig


class DataError(ValueError):
    pass


@dataclass
class DocumentFeatures:
    doc_ids: list
    family_ids: list
    disorders: list
    seg_ids: list  # per document, list of segment ids
    tokens: list  # per document, list of per-segment token tuples
    durations: list  # per document, array of segment durations
    seg_labels: list  # per document, (n_seg, 12) array (NaN rows when unlabelled)
    text: list  # per document, (n_seg, D_text)
    text_schema: tuple
    emotion_probs: list  # per document, (n_seg, 4) text emotion probabilities
    audio: list = None  # per document, (n_seg, D_audio) or None
    audio_schema: tuple = ()
    audio_error: str = None
    notes: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.doc_ids)


def load_tables(cfg):
    tables = {}
    for name, path in cfg["embeddings"].items():
        if path is None:
            tables[name] = EmbeddingTable(EmbeddingSpec(name, cfg["dims"][name]))
        else:
            try:
                tables[name] = load_embedding_file(path)
            except (OSError, ValueError) as exc:
                raise DataError(f"embedding table {name}: {exc}") from exc
    return tables


def frame_config(cfg):
    return dsp.FrameConfig(cfg["dsp"]["frame_ms"], cfg["dsp"]["hop_ms"])


def _emotion_cfg(cfg, salt):
    e = cfg["emotion"]
    return TrainConfig(learning_rate=cfg["network"]["learning_rate"], epochs=e["epochs"],
                       batch_size=cfg["network"]["batch_size"], seed=(cfg["seed"] + salt) % 2**31)


def train_text_encoder(cfg, tables):
    a, e = cfg["aux"], cfg["emotion"]
    if a["text"] is not None:
        aux = transfer.load_emotion_corpus(a["text"], "text", tables["subword"])
    else:
        aux, _ = transfer.synth_text_emotion(a["synth_size"], seed=a["synth_seed"],
                                             dim=tables["subword"].dim, subword_table=tables["subword"])
    enc, _ = transfer.train_text_emotion(aux, _emotion_cfg(cfg, 101), emotion_dim=e["dim"],
                                         hidden_dim=e["hidden_dim"])
    return enc


def train_audio_encoders(cfg, finetune=None):
    a, e = cfg["aux"], cfg["emotion"]
    fc = frame_config(cfg)
    n_mels = cfg["dsp"]["n_mels"]
    if a["covarep"] is None or a["spectrogram"] is None:
        refs, labels = transfer.synth_emotion_audio(a["synth_size"], seed=a["synth_seed"] + 1,
                                                    sr=cfg["synth"]["sample_rate"])
        cov_aux, spec_aux = transfer.audio_emotion_corpora(refs, labels, fc, n_mels)
    if a["covarep"] is not None:
        cov_aux = transfer.load_emotion_corpus(a["covarep"], "covarep", frame_cfg=fc, n_mels=n_mels)
    if a["spectrogram"] is not None:
        spec_aux = transfer.load_emotion_corpus(a["spectrogram"], "spectrogram", frame_cfg=fc, n_mels=n_mels)
    ft_cfg = None
    if finetune is not None and e["finetune_epochs"] > 0:
        ft_cfg = TrainConfig(learning_rate=cfg["network"]["learning_rate"] * 0.1, epochs=e["finetune_epochs"],
                             batch_size=cfg["network"]["batch_size"], seed=(cfg["seed"] + 103) % 2**31)
    else:
        finetune = None
    cov_enc, _ = transfer.train_audio_emotion_covarep(cov_aux, _emotion_cfg(cfg, 102), emotion_dim=e["dim"],
                                                      hidden_dim=e["hidden_dim"], finetune=finetune,
                                                      finetune_cfg=ft_cfg)
    spec_enc, _ = transfer.train_audio_emotion_spectrogram(spec_aux, _emotion_cfg(cfg, 104),
                                                           emotion_dim=e["dim"], hidden_dim=e["hidden_dim"])
    return cov_enc, spec_enc


def _labels_matrix(segments):
    rows = []
    for s in segments:
        rows.append(s.labels.vector() if s.labels is not None else np.full(len(SEGMENT_LABEL_NAMES), np.nan))
    return np.array(rows, dtype=np.float64)


def build_features(corpus, cfg, need_audio=True, log=None):
    """Compute every segment representation the experiment grid needs."""
    if len(corpus) == 0:
        raise DataError("corpus has no documents")
    log = log or (lambda msg: None)
    tables = load_tables(cfg)
    dims = {k: t.dim for k, t in tables.items()}
    text_enc = train_text_encoder(cfg, tables)
    log("text emotion encoder trained")

    docs = corpus.documents
    all_segments = [s for d in docs for s in d.segments]
    seqs = [transfer.text_sequence(s.tokens or ("<empty>",), tables["subword"]) for s in all_segments]
    emo_vecs = text_enc.encode(seqs)
    emo_probs = text_enc.predict_proba(seqs)

    text_rows = []
    schema = None
    for k, s in enumerate(all_segments):
        toks = list(s.tokens)
        fv = concat_segment_text(segment_vector(tables["lm"], s.segment_id, toks),
                                 segment_vector(tables["subword"], s.segment_id, toks),
                                 segment_vector(tables["docvec"], s.segment_id, toks),
                                 emo_vecs[k], dims=dims)
        schema = fv.schema
        text_rows.append(fv.values)

    feats = DocumentFeatures(
        doc_ids=[d.document_id for d in docs],
        family_ids=[d.family_id for d in docs],
        disorders=[d.labels.disorder for d in docs],
        seg_ids=[[s.segment_id for s in d.segments] for d in docs],
        tokens=[[tuple(s.tokens) for s in d.segments] for d in docs],
        durations=[np.array([s.duration_s for s in d.segments]) for d in docs],
        seg_labels=[_labels_matrix(d.segments) for d in docs],
        text=_split(np.array(text_rows), docs),
        text_schema=schema,
        emotion_probs=_split(emo_probs, docs),
    )
    if need_audio:
        try:
            feats.audio, feats.audio_schema = _audio_features(corpus, all_segments, cfg, tables, dims, log)
        except (DataError, ValueError, OSError) as exc:
            feats.audio_error = str(exc)
            log(f"audio features unavailable: {exc}")
    return feats


def _split(rows, docs):
    out, start = [], 0
    for d in docs:
        n = len(d.segments)
        out.append(rows[start : start + n])
        start += n
    return out


def _audio_features(corpus, all_segments, cfg, tables, dims, log):
    fc = frame_config(cfg)
    analyses = []
    for s in all_segments:
        if s.audio_path is None:
            raise DataError(f"segment {s.segment_id} has no audio")
        try:
            audio = resolve_audio(s.audio_path, corpus.base_dir)
            analyses.append(dsp.analyze_segment(audio, fc, cfg["dsp"]["n_mels"], cfg["dsp"]["n_mfcc"]))
        except (OSError, ValueError) as exc:
            raise DataError(f"segment {s.segment_id}: {exc}") from exc
    log(f"dsp features for {len(analyses)} segments")
    finetune = None
    if cfg["emotion"]["finetune_epochs"] > 0:
        keep = [i for i, s in enumerate(all_segments)
                if s.labels is not None and s.labels.emotion in transfer.EMOTIONS]
        if keep:
            finetune = transfer.EmotionCorpus([analyses[i].covarep for i in keep],
                                              [all_segments[i].labels.emotion for i in keep])
    cov_enc, spec_enc = train_audio_encoders(cfg, finetune)
    log("audio emotion encoders trained")
    e_cov = cov_enc.encode([a.covarep for a in analyses])
    e_spec = spec_enc.encode([a.mel.matrix for a in analyses])
    rows, schema = [], None
    for k, s in enumerate(all_segments):
        fv = concat_segment_audio(segment_vector(tables["wavenet"], s.segment_id, []),
                                  segment_vector(tables["vggish"], s.segment_id, []),
                                  analyses[k].dsp_vector,
                                  transfer.emotion_audio_concat(e_cov[k], e_spec[k]).values, dims=dims)
        schema = fv.schema
        rows.append(fv.values)
    return _split(np.array(rows), corpus.documents), schema
