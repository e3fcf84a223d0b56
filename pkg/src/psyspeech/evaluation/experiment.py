"""The experiment grid: modalities x models x tasks x folds.

Work is organised per fold.  Inside a fold every network and classifier is
fitted on that fold's training documents only; the audio compressor is
shared by the fold's tasks because it is trained on segment labels, not on
the task target.  Each cell gets its own seed, derived from the master seed
and the cell coordinates with FNV-1a, so results do not depend on the
order (or process) in which cells run.
"""

import json
import platform
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .. import __version__
from ..corpus import (
    DISORDERS, SynthConfig, corpus_stats, label_heatmap, load_corpus, synth_corpus,
    write_heatmap_csv, write_stats_csv,
)
from ..embed import BowVectorizer, TfidfVectorizer, fnv1a64
from ..fusion import train_audio_compressor
from ..io import atomic_write_text, write_csv
from ..nn import AttentionLstm, DocFusionNet, SegFusionNet, TrainConfig, sigmoid, train
from ..shallow import LinearSVM, make_classifier
from ..transfer import EMOTIONS
from . import figures
from .config import BASELINES, config_hash
from .cv import assert_no_leakage, grouped_kfold, make_task, random_oversample
from .features import build_features
from .metrics import auc_trapezoid, confusion, roc_curve


def cell_seed(master, *coords):
    """31-bit seed from FNV-1a 64 of ``master|coord|coord...``."""
    key = "|".join(str(c) for c in (master,) + coords)
    return fnv1a64(key.encode("utf-8")) & 0x7FFFFFFF


@dataclass
class FoldOutput:
    fold: int
    predictions: list = field(default_factory=list)  # (task, modality, model, doc_idx, y, score, pred)
    errors: list = field(default_factory=list)  # (task, modality, model, fold, reason)
    attention: list = field(default_factory=list)  # (task, doc_idx, seg_idx, weight)
    gates: list = field(default_factory=list)  # (task, doc_idx, name, value)


@dataclass
class CellResult:
    task: str
    modality: str
    model: str
    accuracy: float = None
    fold_accuracy: list = field(default_factory=list)
    auc: float = None
    confusion: object = None
    doc_idx: np.ndarray = None
    y: np.ndarray = None
    scores: np.ndarray = None
    error: str = None


@dataclass
class MetricsReport:
    config: dict
    cells: dict  # (task, modality, model) -> CellResult
    attention: list
    gates: list
    features: object

    @property
    def missing(self):
        return [c for c in self.cells.values() if c.error is not None]


# ------------------------------------------------------------------ helpers


def _zscore_stats(rows):
    mu = rows.mean(axis=0)
    sd = rows.std(axis=0)
    return mu, np.where(sd > 1e-12, sd, 1.0)


def _net_cfg(cfg, seed, epochs=None):
    n = cfg["network"]
    return TrainConfig(learning_rate=n["learning_rate"], epochs=epochs or n["epochs"],
                       batch_size=n["batch_size"], seed=seed)


def _shallow(cfg, name, seed):
    s = cfg["shallow"]
    if name == "RF":
        return make_classifier("RF", seed=seed, n_trees=s["rf_trees"], max_depth=s["rf_max_depth"])
    if name == "SVM":
        return make_classifier("SVM", seed=seed, lam=s["svm_lambda"], n_iter=s["svm_iter"])
    if name == "KNN":
        return make_classifier("KNN", k=s["knn_k"])
    return make_classifier(name)


def _doc_tokens(feats, i):
    return [t for seg in feats.tokens[i] for t in seg]


# ------------------------------------------------------------------ one fold


def run_fold(feats, cfg, fold, train_all, test_all):
    out = FoldOutput(fold)
    master = cfg["seed"]
    assert_no_leakage(train_all, test_all, feats.family_ids)
    mods = cfg["modalities"]
    need_audio = "audio" in mods or "multi" in mods

    Xt_rows = np.concatenate([feats.text[i] for i in train_all])
    mu_t, sd_t = _zscore_stats(Xt_rows)
    text = [(x - mu_t) / sd_t for x in feats.text]

    comp_seqs, comp_error = None, None
    if need_audio:
        if feats.audio is None:
            comp_error = f"audio unavailable: {feats.audio_error}"
        else:
            try:
                comp_seqs = _compress_audio(feats, cfg, fold, train_all)
            except (ValueError, RuntimeError, FloatingPointError) as exc:
                comp_error = f"audio compressor failed: {exc}"

    disorders = np.array(feats.disorders, dtype=object)
    for task_name in cfg["tasks"]:
        task = make_task(task_name, cfg["framing"])
        members = task.members(feats.disorders)
        tr = train_all[members[train_all]]
        te = test_all[members[test_all]]
        y = task.targets(feats.disorders)
        if te.size == 0 or np.unique(y[tr]).size < 2:
            reason = "empty test fold" if te.size == 0 else "single-class training fold"
            for m in mods:
                for model in cfg["models"]:
                    out.errors.append((task_name, m, model, fold, reason))
            if cfg["baselines"]:
                for b in BASELINES:
                    out.errors.append((task_name, "text", b, fold, reason))
            continue
        over = random_oversample(tr, disorders, seed=cell_seed(master, "oversample", task_name, fold),
                                 test_indices=te)
        assert_no_leakage(over, te, feats.family_ids)
        penult = {}
        for modality in mods:
            seed = cell_seed(master, task_name, modality, fold)
            try:
                if modality == "text":
                    net, inputs = _unimodal(text, cfg, seed)
                elif comp_seqs is None:
                    raise RuntimeError(comp_error)
                elif modality == "audio":
                    net, inputs = _unimodal(comp_seqs, cfg, seed)
                else:
                    net, inputs = _multimodal(text, comp_seqs, penult, cfg, seed)
                train(net, [inputs[i] for i in over], y[over][:, None].astype(np.float64),
                      _net_cfg(cfg, seed))
                vec_tr = net.penultimate([inputs[i] for i in over])
                fwd = net.forward([inputs[i] for i in te])
                penult[modality] = (net, inputs)
            except (ValueError, RuntimeError, FloatingPointError) as exc:
                for model in cfg["models"]:
                    out.errors.append((task_name, modality, model, fold, f"{modality} network: {exc}"))
                continue
            vec_te = fwd["penultimate"]
            _record_interpretability(out, task_name, modality, te, fwd)
            p_te = sigmoid(fwd["logits"][:, 0])
            mu, sd = _zscore_stats(vec_tr)
            Z_tr, Z_te = (vec_tr - mu) / sd, (vec_te - mu) / sd
            for model in cfg["models"]:
                if model == "LSTM":
                    scores, pred = p_te, (p_te > 0.5).astype(np.int64)
                else:
                    try:
                        clf = _shallow(cfg, model, cell_seed(master, task_name, modality, model, fold))
                        clf.fit(Z_tr, y[over])
                        scores, pred = clf.scores(Z_te), clf.predict(Z_te)
                    except (ValueError, RuntimeError, np.linalg.LinAlgError) as exc:
                        out.errors.append((task_name, modality, model, fold, f"{model}: {exc}"))
                        continue
                out.predictions.extend((task_name, modality, model, int(i), int(y[i]), float(s), int(p))
                                       for i, s, p in zip(te, scores, pred))
        if cfg["baselines"]:
            _baselines(out, feats, cfg, task_name, fold, tr, over, te, y)
    return out


def _compress_audio(feats, cfg, fold, train_all):
    n = cfg["network"]
    rows = np.concatenate([feats.audio[i] for i in train_all])
    mu, sd = _zscore_stats(rows)
    labels = np.concatenate([feats.seg_labels[i] for i in train_all])
    keep = ~np.isnan(labels).any(axis=1)
    if not keep.any():
        raise ValueError("no labelled training segments")
    seqs = [((r - mu) / sd)[None, :] for r in rows[keep]]
    seed = cell_seed(cfg["seed"], "compressor", fold)
    comp, _ = train_audio_compressor(seqs, labels[keep], _net_cfg(cfg, seed, n["compressor_epochs"]),
                                     dim=n["compressor_dim"], hidden_dim=n["compressor_hidden"])
    out = []
    for a in feats.audio:
        out.append(comp([((r - mu) / sd)[None, :] for r in a]))
    return out


def _unimodal(seqs, cfg, seed):
    n = cfg["network"]
    net = AttentionLstm(seqs[0].shape[1], hidden_dim=n["hidden_dim"], doc_dim=n["doc_dim"], seed=seed)
    return net, seqs


def _multimodal(text, audio, penult, cfg, seed):
    n, f = cfg["network"], cfg["fusion"]
    if f["strategy"] == "segment":
        net = SegFusionNet(text[0].shape[1], audio[0].shape[1], hidden_dim=n["hidden_dim"],
                           fused_dim=n["fused_dim"], seed=seed)
        return net, list(zip(text, audio))
    if f["precomputed"]:
        if "text" not in penult or "audio" not in penult:
            raise RuntimeError("precomputed fusion needs the text and audio networks of this fold")
        (tn, ti), (an, ai) = penult["text"], penult["audio"]
        hl = tn.penultimate(ti)
        ha = an.penultimate(ai)
        net = DocFusionNet(hl.shape[1], ha.shape[1], fused_dim=n["fused_dim"], precomputed=True, seed=seed)
        return net, list(zip(hl, ha))
    net = DocFusionNet(text[0].shape[1], audio[0].shape[1], hidden_text=n["hidden_dim"],
                       hidden_audio=n["hidden_dim"], fused_dim=n["fused_dim"], seed=seed)
    return net, list(zip(text, audio))


def _record_interpretability(out, task, modality, te, fwd):
    if modality == "text" and "attention" in fwd:
        for row, i in enumerate(te):
            m = fwd["attention"][row]
            for k in range(int(np.count_nonzero(m)) or m.size):
                out.attention.append((task, int(i), k, float(m[k])))
    if modality == "multi":
        if "w_l" in fwd:
            for row, i in enumerate(te):
                out.gates.append((task, int(i), "language", float(fwd["w_l"][row])))
                out.gates.append((task, int(i), "acoustic", float(fwd["w_a"][row])))
        elif "gates" in fwd:
            for row, i in enumerate(te):
                n = int(fwd["mask"][row].sum())
                for k in range(n):
                    out.gates.append((task, int(i), f"segment_{k}", float(fwd["gates"][row, k])))


def _baselines(out, feats, cfg, task, fold, tr, over, te, y):
    docs_tr = [_doc_tokens(feats, i) for i in tr]
    for name, vec_cls in (("tf-idf+SVM", TfidfVectorizer), ("BOW+SVM", BowVectorizer)):
        try:
            vec = vec_cls().fit(docs_tr)
            X_tr = vec.transform([_doc_tokens(feats, i) for i in over])
            X_te = vec.transform([_doc_tokens(feats, i) for i in te])
            s = cfg["shallow"]
            clf = LinearSVM(lam=s["svm_lambda"], n_iter=s["svm_iter"],
                            seed=cell_seed(cfg["seed"], task, "text", name, fold)).fit(X_tr, y[over])
            scores, pred = clf.scores(X_te), clf.predict(X_te)
        except (ValueError, RuntimeError) as exc:
            out.errors.append((task, "text", name, fold, str(exc)))
            continue
        out.predictions.extend((task, "text", name, int(i), int(y[i]), float(sc), int(p))
                               for i, sc, p in zip(te, scores, pred))


# ------------------------------------------------------------------ driver


def load_run_corpus(cfg):
    if cfg["corpus"] is not None:
        return load_corpus(cfg["corpus"])
    s = cfg["synth"]
    sc = SynthConfig(n_families=s["n_families"], docs_per_family=tuple(s["docs_per_family"]),
                     segments_per_doc=tuple(s["segments_per_doc"]),
                     tokens_per_segment=tuple(s["tokens_per_segment"]),
                     class_priors=tuple(s["class_priors"]), text_strength=s["text_strength"],
                     audio_strength=s["audio_strength"], sample_rate=s["sample_rate"],
                     duration_s=tuple(s["duration_s"]))
    return synth_corpus(sc, seed=s["seed"])


def _fold_job(args):
    feats, cfg, fold, train_all, test_all = args
    return run_fold(feats, cfg, fold, train_all, test_all)


def run_experiment(corpus, cfg, jobs=1, log=None):
    """Run the full grid and return a MetricsReport (no files written)."""
    log = log or (lambda msg: None)
    need_audio = "audio" in cfg["modalities"] or "multi" in cfg["modalities"]
    feats = build_features(corpus, cfg, need_audio=need_audio, log=log)
    plan = grouped_kfold(feats.family_ids, cfg["k"], seed=cell_seed(cfg["seed"], "folds"))
    splits = plan.splits(feats.family_ids)
    jobs_args = [(feats, cfg, f, tr, te) for f, (tr, te) in enumerate(splits)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            outputs = list(pool.map(_fold_job, jobs_args))
    else:
        outputs = []
        for a in jobs_args:
            outputs.append(_fold_job(a))
            log(f"fold {a[2]} done")
    return _aggregate(cfg, feats, outputs)


def _cell_keys(cfg):
    for task in cfg["tasks"]:
        for modality in cfg["modalities"]:
            for model in cfg["models"]:
                yield task, modality, model
        if cfg["baselines"]:
            for b in BASELINES:
                yield task, "text", b


def _aggregate(cfg, feats, outputs):
    errors = {}
    for o in outputs:
        for task, modality, model, fold, reason in o.errors:
            errors.setdefault((task, modality, model), f"fold {fold}: {reason}")
    preds = {}
    for o in outputs:
        for task, modality, model, i, yi, s, p in o.predictions:
            preds.setdefault((task, modality, model), []).append((o.fold, i, yi, s, p))
    cells = {}
    for key in _cell_keys(cfg):
        cell = CellResult(*key)
        if key in errors or key not in preds:
            cell.error = errors.get(key, "no predictions")
            cells[key] = cell
            continue
        rows = sorted(preds[key], key=lambda r: r[1])
        fold = np.array([r[0] for r in rows])
        cell.doc_idx = np.array([r[1] for r in rows])
        cell.y = np.array([r[2] for r in rows])
        cell.scores = np.array([r[3] for r in rows])
        pred = np.array([r[4] for r in rows])
        cell.confusion = confusion(pred, cell.y)
        cell.accuracy = cell.confusion.accuracy
        cell.fold_accuracy = [float((pred[fold == f] == cell.y[fold == f]).mean())
                              for f in sorted(set(fold.tolist()))]
        if 0 < cell.y.sum() < cell.y.size:
            cell.auc = auc_trapezoid(cell.scores, cell.y)
        cells[key] = cell
    attention = sorted(a for o in outputs for a in o.attention)
    gates = sorted(g for o in outputs for g in o.gates)
    return MetricsReport(cfg, cells, attention, gates, feats)


# ------------------------------------------------------------------ reports


def table2_rows(report):
    cfg = report.config
    header = ["model"] + [f"{t.capitalize()} {m.capitalize()}" for t in DISORDERS for m in ("text", "audio", "multi")]
    rows = []
    for model in list(cfg["models"]) + (list(BASELINES) if cfg["baselines"] else []):
        row = [model]
        for t in DISORDERS:
            for m in ("text", "audio", "multi"):
                if model in BASELINES and m != "text":
                    row.append("-")
                    continue
                cell = report.cells.get((t, m, model))
                if cell is None:
                    row.append("")
                elif cell.error is not None:
                    row.append("n/a")
                else:
                    row.append(f"{100 * cell.accuracy:.2f}")
        rows.append(row)
    return header, rows


def averages(report):
    """Several candidate averages of the pooled accuracies (percent)."""
    ok = [c for c in report.cells.values() if c.error is None and c.model not in BASELINES]
    out = []

    def add(name, cells):
        if cells:
            out.append((name, f"{100 * np.mean([c.accuracy for c in cells]):.2f}"))

    add("all cells", ok)
    for m in ("text", "audio", "multi"):
        add(f"{m} cells", [c for c in ok if c.modality == m])
    add("multi RF", [c for c in ok if c.modality == "multi" and c.model == "RF"])
    best = []
    for t in report.config["tasks"]:
        cands = [c for c in ok if c.task == t and c.modality == "multi"]
        if cands:
            best.append(max(cands, key=lambda c: c.accuracy))
    add("best multi model per task", best)
    return out


def _timeline_rows(feats, cfg, i):
    thr = cfg["emotion"]["neutral_threshold"]
    d = feats.durations[i]
    dur = d if np.all(d > 0) else np.ones_like(d)
    start = np.concatenate([[0.0], np.cumsum(dur)[:-1]])
    rows = []
    for k, p in enumerate(feats.emotion_probs[i]):
        j = int(np.argmax(p))
        emo = EMOTIONS[j] if p[j] >= thr else "neutral"
        rows.append((feats.doc_ids[i], k, feats.seg_ids[i][k], float(start[k]), float(dur[k]), emo, float(p[j])))
    return rows


def write_report(report, corpus, out_dir):
    """Write every artifact under ``out_dir``; returns the list of paths."""
    out = Path(out_dir)
    cfg, feats = report.config, report.features
    written = []

    def csv(name, header, rows):
        write_csv(out / name, header, rows)
        written.append(out / name)

    def svg(name, text):
        figures.write_svg(out / name, text)
        written.append(out / name)

    header, rows = table2_rows(report)
    csv("table2.csv", header, rows)
    fold_rows, auc_rows, missing_rows = [], [], []
    for (t, m, model), c in report.cells.items():
        if c.error is not None:
            missing_rows.append([t, m, model, c.error])
            continue
        for f, a in enumerate(c.fold_accuracy):
            fold_rows.append([t, m, model, f, a])
        cm = c.confusion
        auc_rows.append([t, m, model, c.accuracy, "" if c.auc is None else c.auc, cm.tp, cm.fp, cm.tn, cm.fn])
    csv("cells.csv", ["task", "modality", "model", "accuracy", "auc", "tp", "fp", "tn", "fn"], auc_rows)
    csv("folds.csv", ["task", "modality", "model", "fold", "accuracy"], fold_rows)
    csv("missing.csv", ["task", "modality", "model", "reason"], missing_rows)
    csv("averages.csv", ["average", "accuracy_percent"], averages(report))

    for t in cfg["tasks"]:
        roc_rows, curves = [], []
        for m in cfg["modalities"]:
            for model in list(cfg["models"]) + (list(BASELINES) if cfg["baselines"] and m == "text" else []):
                c = report.cells.get((t, m, model))
                if c is None or c.error is not None or c.auc is None:
                    continue
                r = roc_curve(c.scores, c.y)
                for x, yv, th in zip(r.fpr, r.tpr, r.thresholds):
                    roc_rows.append([m, model, x, yv, th])
                if model == cfg["roc_model"]:
                    curves.append((m, r.fpr, r.tpr, c.auc))
        csv(f"roc_{t}.csv", ["modality", "model", "fpr", "tpr", "threshold"], roc_rows)
        svg(f"roc_{t}.svg", figures.roc_svg(curves, f"{t} ({cfg['roc_model']})"))

    att_rows = [[t, feats.doc_ids[i], feats.seg_ids[i][k], w] for t, i, k, w in report.attention]
    csv("attention.csv", ["task", "document_id", "segment_id", "weight"], att_rows)
    if report.attention:
        t0, i0 = report.attention[0][0], report.attention[0][1]
        rows = [(" ".join(feats.tokens[i][k]), w) for t, i, k, w in report.attention if t == t0 and i == i0]
        svg("attention.svg", figures.attention_svg(rows, f"{feats.doc_ids[i0]} ({t0})"))
    csv("gates.csv", ["task", "document_id", "gate", "value"],
        [[t, feats.doc_ids[i], name, v] for t, i, name, v in report.gates])

    tl = [r for i in range(len(feats)) for r in _timeline_rows(feats, cfg, i)]
    csv("timeline.csv", ["document_id", "segment_index", "segment_id", "start_s", "duration_s", "emotion",
                         "score"], tl)
    first = [r for r in tl if r[0] == feats.doc_ids[0]]
    svg("timeline.svg", figures.timeline_svg([(r[3], r[4], r[5]) for r in first], feats.doc_ids[0]))

    write_stats_csv(corpus_stats(corpus), out / "stats.csv")
    written.append(out / "stats.csv")
    for level in ("segment", "document"):
        hm = label_heatmap(corpus, level)
        write_heatmap_csv(hm, out / f"heatmap_{level}.csv")
        svg(f"heatmap_{level}.svg", figures.heatmap_svg(*hm, title=f"{level} labels"))
        written.append(out / f"heatmap_{level}.csv")

    record = {
        "config": cfg,
        "config_hash": config_hash(cfg),
        "seed": cfg["seed"],
        "versions": {"psyspeech": __version__, "numpy": np.__version__,
                     "python": platform.python_version()},
        "documents": len(feats),
        "segments": int(sum(len(s) for s in feats.seg_ids)),
        "missing_cells": len(missing_rows),
        "averages": dict(averages(report)),
    }
    atomic_write_text(out / "run.json", json.dumps(record, indent=2, sort_keys=True) + "\n")
    written.append(out / "run.json")
    return written


def run(cfg, out_dir, jobs=1, log=None):
    """Load (or synthesise) the corpus, run the grid and write the reports."""
    log = log or (lambda msg: print(msg, file=sys.stderr))
    corpus = load_run_corpus(cfg)
    report = run_experiment(corpus, cfg, jobs=jobs, log=log)
    write_report(report, corpus, out_dir)
    return report
