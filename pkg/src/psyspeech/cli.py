"""Command-line entry point.

Exit codes: 0 success, 1 configuration error, 2 data error, 3 runtime
failure (including a run in which any grid cell was aborted).
"""

import csv
import json
import re
import sys
from pathlib import Path

import click

from . import __version__
from . import corpus as corpus_mod
from . import dsp, transfer
from .evaluation import figures
from .evaluation.config import ConfigError, canonical_json, defaults, load_config
from .evaluation.experiment import load_run_corpus, run_experiment, write_report
from .evaluation.features import DataError
from .io import write_csv
from .nn import TrainConfig

EXIT_CONFIG, EXIT_DATA, EXIT_RUNTIME = 1, 2, 3


def _fail(code, msg):
    click.echo(f"error: {msg}", err=True)
    sys.exit(code)


def _guard(fn):
    """Map exceptions to the documented exit codes."""
    import functools

    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except ConfigError as exc:
            _fail(EXIT_CONFIG, exc)
        except (DataError, corpus_mod.CorpusError, dsp.AudioError, OSError) as exc:
            _fail(EXIT_DATA, exc)
        except ValueError as exc:
            _fail(EXIT_DATA, exc)
        except (RuntimeError, ArithmeticError) as exc:
            _fail(EXIT_RUNTIME, exc)

    return wrapper


@click.group()
@click.version_option(version=__version__)
def main():
    """Multimodal mental-disorder recognition from interview speech."""


# ------------------------------------------------------------------ synth / stats


@main.command()
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False))
@click.option("--families", default=150, show_default=True, type=int)
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--text-strength", default=0.8, show_default=True, type=float)
@click.option("--audio-strength", default=0.8, show_default=True, type=float)
@click.option("--no-audio", is_flag=True, help="Omit synthetic audio references.")
@_guard
def synth(out_path, families, seed, text_strength, audio_strength, no_audio):
    """Write a synthetic planted-signal corpus as JSONL."""
    cfg = corpus_mod.SynthConfig(n_families=families, text_strength=text_strength,
                                 audio_strength=audio_strength, with_audio=not no_audio)
    c = corpus_mod.synth_corpus(cfg, seed=seed)
    corpus_mod.save_corpus(c, out_path)
    click.echo(f"{len(c)} documents written to {out_path}")


@main.command()
@click.argument("corpus_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False))
@_guard
def stats(corpus_path, out_dir):
    """Corpus statistics and label heatmap count matrices."""
    c = corpus_mod.load_corpus(corpus_path)
    out = Path(out_dir)
    corpus_mod.write_stats_csv(corpus_mod.corpus_stats(c), out / "stats.csv")
    for level in ("segment", "document"):
        corpus_mod.write_heatmap_csv(corpus_mod.label_heatmap(c, level), out / f"heatmap_{level}.csv")
    click.echo(f"statistics written to {out}")


# ------------------------------------------------------------------ extract-features


def _safe_name(k, segment_id):
    return f"{k:05d}_{re.sub(r'[^A-Za-z0-9._-]', '_', segment_id)}.csv"


@main.command("extract-features")
@click.argument("corpus_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False))
@click.option("--frame-ms", default=25.0, show_default=True, type=float)
@click.option("--hop-ms", default=10.0, show_default=True, type=float)
@click.option("--n-mels", default=26, show_default=True, type=int)
@_guard
def extract_features(corpus_path, out_dir, frame_ms, hop_ms, n_mels):
    """Per-segment frame-level acoustic features (one CSV per segment)."""
    c = corpus_mod.load_corpus(corpus_path)
    fc = dsp.FrameConfig(frame_ms, hop_ms)
    out = Path(out_dir)
    index, failed = [], 0
    k = 0
    for doc in c.documents:
        for seg in doc.segments:
            if seg.audio_path is None:
                continue
            name = _safe_name(k, seg.segment_id)
            k += 1
            try:
                a = dsp.analyze_segment(c.load_audio(seg), fc, n_mels)
            except (OSError, ValueError) as exc:
                failed += 1
                index.append([seg.segment_id, doc.document_id, "", 0, "error", str(exc)])
                click.echo(f"warning: {seg.segment_id}: {exc}", err=True)
                continue
            transfer.write_feature_csv(out / name, a.covarep, dsp.COVAREP_COLUMNS)
            index.append([seg.segment_id, doc.document_id, name, a.covarep.shape[0], "ok", ""])
    write_csv(out / "index.csv", ["segment_id", "document_id", "file", "frames", "status", "message"], index)
    click.echo(f"{len(index) - failed} segments extracted, {failed} failed")


# ------------------------------------------------------------------ train-emotion


@main.command("train-emotion")
@click.option("--branch", required=True, type=click.Choice(["text", "covarep", "spectrogram"]))
@click.argument("aux", required=False, type=click.Path(exists=True, dir_okay=False))
@click.option("--synth", "synth_n", type=int, default=None, help="Use N synthetic items instead of AUX.")
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False))
@click.option("--epochs", default=15, show_default=True, type=int)
@click.option("--lr", default=0.01, show_default=True, type=float)
@click.option("--batch-size", default=16, show_default=True, type=int)
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--emotion-dim", default=32, show_default=True, type=int)
@click.option("--hidden-dim", default=32, show_default=True, type=int)
@click.option("--holdout", default=0.2, show_default=True, type=float)
@_guard
def train_emotion(branch, aux, synth_n, out_path, epochs, lr, batch_size, seed, emotion_dim, hidden_dim,
                  holdout):
    """Train an emotion encoder on an auxiliary corpus and save a snapshot."""
    if (aux is None) == (synth_n is None):
        raise ConfigError("give exactly one of AUX or --synth N")
    try:
        cfg = TrainConfig(learning_rate=lr, epochs=epochs, batch_size=batch_size, seed=seed)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    if synth_n is not None:
        if branch == "text":
            data, _ = transfer.synth_text_emotion(synth_n, seed=seed)
        else:
            refs, labels = transfer.synth_emotion_audio(synth_n, seed=seed)
            cov, spec = transfer.audio_emotion_corpora(refs, labels)
            data = cov if branch == "covarep" else spec
    else:
        data = transfer.load_emotion_corpus(aux, branch)
    test_set, train_set = data.split(holdout, seed=seed) if 0 < holdout < 1 else (None, data)
    trainer = {"text": transfer.train_text_emotion,
               "covarep": transfer.train_audio_emotion_covarep,
               "spectrogram": transfer.train_audio_emotion_spectrogram}[branch]
    enc, result = trainer(train_set, cfg, emotion_dim=emotion_dim, hidden_dim=hidden_dim)
    enc.save(out_path)
    click.echo(f"final training loss {result.losses[-1]:.6f}")
    if test_set is not None and len(test_set):
        click.echo(f"held-out accuracy {enc.accuracy(test_set):.4f} on {len(test_set)} items")


# ------------------------------------------------------------------ run


@main.command()
@click.option("--config", "config_path", type=click.Path(dir_okay=False))
@click.option("--out", "out_dir", default=None, type=click.Path(file_okay=False),
              help="Run directory (default: 'run' next to the config file).")
@click.option("--jobs", default=1, show_default=True, type=int)
@click.option("--validate-only", is_flag=True, help="Check the config and corpus, then stop.")
@click.option("--print-defaults", is_flag=True, help="Print the default configuration and exit.")
@click.option("--quiet", is_flag=True)
@_guard
def run(config_path, out_dir, jobs, validate_only, print_defaults, quiet):
    """Run the full cross-validated experiment grid."""
    if print_defaults:
        click.echo(json.dumps(defaults(), indent=2, sort_keys=True))
        return
    if config_path is None:
        raise ConfigError("--config is required")
    if jobs < 1:
        raise ConfigError("--jobs must be >= 1")
    cfg = load_config(config_path)
    corpus = load_run_corpus(cfg)
    if validate_only:
        click.echo(f"config ok ({len(corpus)} documents); resolved config:")
        click.echo(canonical_json(cfg))
        return
    out = Path(out_dir) if out_dir else Path(config_path).parent / "run"
    log = (lambda m: None) if quiet else (lambda m: click.echo(m, err=True))
    report = run_experiment(corpus, cfg, jobs=jobs, log=log)
    write_report(report, corpus, out)
    missing = report.missing
    click.echo(f"results written to {out}; {len(missing)} aborted cells")
    if missing:
        for c in missing:
            click.echo(f"aborted: {c.task}/{c.modality}/{c.model}: {c.error}", err=True)
        sys.exit(EXIT_RUNTIME)


# ------------------------------------------------------------------ plot


def _read_rows(path):
    with open(path, encoding="utf-8", newline="") as fh:
        return list(csv.DictReader(fh))


@main.command()
@click.argument("kind", type=click.Choice(["roc", "timeline", "attention", "heatmap"]))
@click.argument("inputs", type=click.Path(exists=True, dir_okay=False))
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False))
@click.option("--model", default="LSTM", show_default=True, help="roc: which model's curves to draw.")
@click.option("--document", default=None, help="timeline/attention: document id (default: first).")
@click.option("--task", default=None, help="attention: task (default: first).")
@click.option("--corpus", "corpus_path", default=None, type=click.Path(exists=True, dir_okay=False),
              help="attention: corpus used to show segment text.")
@_guard
def plot(kind, inputs, out_path, model, document, task, corpus_path):
    """Render a CSV produced by ``run`` (or ``stats``) as SVG."""
    rows = _read_rows(inputs)
    if kind == "roc":
        curves = []
        for m in dict.fromkeys(r["modality"] for r in rows if r["model"] == model):
            pts = [r for r in rows if r["model"] == model and r["modality"] == m]
            fpr = [float(r["fpr"]) for r in pts]
            tpr = [float(r["tpr"]) for r in pts]
            area = sum((fpr[i + 1] - fpr[i]) * (tpr[i + 1] + tpr[i]) / 2 for i in range(len(pts) - 1))
            curves.append((m, fpr, tpr, area))
        if not curves:
            raise DataError(f"no ROC rows for model {model!r}")
        text = figures.roc_svg(curves, f"{Path(inputs).stem} ({model})")
    elif kind == "timeline":
        if not rows:
            raise DataError("empty timeline")
        doc = document or rows[0]["document_id"]
        sel = [r for r in rows if r["document_id"] == doc]
        if not sel:
            raise DataError(f"document {doc!r} not in {inputs}")
        text = figures.timeline_svg([(float(r["start_s"]), float(r["duration_s"]), r["emotion"]) for r in sel], doc)
    elif kind == "attention":
        if not rows:
            raise DataError("empty attention trace")
        t = task or rows[0].get("task", "")
        sel = [r for r in rows if r.get("task", "") == t]
        doc = document or sel[0]["document_id"]
        sel = [r for r in sel if r["document_id"] == doc]
        if not sel:
            raise DataError(f"document {doc!r} not in {inputs}")
        seg_text = {}
        if corpus_path:
            for s in corpus_mod.load_corpus(corpus_path).segments():
                seg_text[s.segment_id] = " ".join(s.tokens)
        text = figures.attention_svg([(seg_text.get(r["segment_id"], r["segment_id"]), float(r["weight"]))
                                      for r in sel], f"{doc} ({t})")
    else:
        if not rows:
            raise DataError("empty heatmap")
        cols = [k for k in rows[0] if k != "label"]
        text = figures.heatmap_svg([r["label"] for r in rows], cols,
                                   [[float(r[c]) for c in cols] for r in rows], Path(inputs).stem)
    figures.write_svg(out_path, text)
    click.echo(f"wrote {out_path}")


if __name__ == "__main__":
    main()
