"""Experiment configuration: defaults, schema validation and hashing."""

import copy
import hashlib
import json
from pathlib import Path

from ..corpus import DISORDERS
from .cv import FRAMINGS

MODALITIES = ("text", "audio", "multi")
MODELS = ("LSTM", "RF", "SVM", "KNN", "LDA", "QDA", "NB")
DEFAULT_MODELS = ("LSTM", "RF", "SVM", "KNN", "LDA", "NB")
BASELINES = ("tf-idf+SVM", "BOW+SVM")


class ConfigError(ValueError):
    pass


# ``None`` defaults name the accepted type(s) in NULLABLE.
DEFAULTS = {
    "seed": None,
    "corpus": None,
    "synth": {
        "seed": 0,
        "n_families": 150,
        "docs_per_family": [3, 5],
        "segments_per_doc": [3, 6],
        "tokens_per_segment": [6, 12],
        "class_priors": [0.355, 0.41, 0.182, 0.053],
        "text_strength": 0.8,
        "audio_strength": 0.8,
        "sample_rate": 8000,
        "duration_s": [0.4, 0.8],
    },
    "embeddings": {"lm": None, "subword": None, "docvec": None, "wavenet": None, "vggish": None},
    "dims": {"lm": 1024, "subword": 100, "docvec": 100, "wavenet": 16, "vggish": 128},
    "aux": {"text": None, "covarep": None, "spectrogram": None, "synth_size": 800, "synth_seed": 1},
    "k": 5,
    "framing": "vs_control",
    "tasks": list(DISORDERS),
    "modalities": list(MODALITIES),
    "models": list(DEFAULT_MODELS),
    "baselines": True,
    "fusion": {"strategy": "document", "precomputed": False},
    "network": {
        "hidden_dim": 64,
        "doc_dim": 64,
        "fused_dim": 64,
        "learning_rate": 0.01,
        "epochs": 20,
        "batch_size": 16,
        "compressor_dim": 64,
        "compressor_hidden": 64,
        "compressor_epochs": 10,
    },
    "emotion": {
        "dim": 32,
        "hidden_dim": 32,
        "epochs": 15,
        "finetune_epochs": 0,
        "neutral_threshold": 0.5,
    },
    "shallow": {"rf_trees": 100, "rf_max_depth": None, "svm_lambda": 0.001, "svm_iter": 2000, "knn_k": 5},
    "dsp": {"frame_ms": 25.0, "hop_ms": 10.0, "n_mels": 26, "n_mfcc": 13},
    "roc_model": "LSTM",
}

NULLABLE = {
    "seed": (int,),
    "corpus": (str,),
    "embeddings.lm": (str,),
    "embeddings.subword": (str,),
    "embeddings.docvec": (str,),
    "embeddings.wavenet": (str,),
    "embeddings.vggish": (str,),
    "aux.text": (str,),
    "aux.covarep": (str,),
    "aux.spectrogram": (str,),
    "shallow.rf_max_depth": (int,),
}


def defaults():
    return copy.deepcopy(DEFAULTS)


def _typecheck(key, default, value):
    if default is None:
        allowed = NULLABLE[key]
        if value is None or (isinstance(value, allowed) and not isinstance(value, bool)):
            return value
        raise ConfigError(f"{key}: expected {' or '.join(t.__name__ for t in allowed)} or null, got {value!r}")
    if isinstance(default, bool):
        if isinstance(value, bool):
            return value
    elif isinstance(default, int):
        if isinstance(value, int) and not isinstance(value, bool):
            return value
    elif isinstance(default, float):
        if isinstance(value, (int, float)) and not isinstance(value, bool):
            return float(value)
    elif isinstance(default, str):
        if isinstance(value, str):
            return value
    elif isinstance(default, list):
        if isinstance(value, list):
            return value
    raise ConfigError(f"{key}: expected {type(default).__name__}, got {value!r}")


def _merge(default, user, prefix=""):
    if not isinstance(user, dict):
        raise ConfigError(f"{prefix or 'config'}: expected an object")
    out = copy.deepcopy(default)
    for key, value in user.items():
        full = f"{prefix}{key}"
        if key not in default:
            raise ConfigError(f"unknown key {full!r}")
        if isinstance(default[key], dict):
            out[key] = _merge(default[key], value, full + ".")
        else:
            out[key] = _typecheck(full, default[key], value)
    return out


def _check_list(key, values, allowed):
    bad = [v for v in values if v not in allowed]
    if bad or not values or len(set(values)) != len(values):
        raise ConfigError(f"{key}: {values!r} must be a nonempty duplicate-free subset of {list(allowed)}")


def _positive(cfg, *keys):
    for key in keys:
        section, name = key.split(".")
        if not cfg[section][name] > 0:
            raise ConfigError(f"{key} must be positive")


def resolve_config(user, base_dir=".", check_paths=True):
    """Merge ``user`` over the defaults and validate.  Relative paths are
    resolved against ``base_dir``; the seed is mandatory."""
    cfg = _merge(DEFAULTS, user)
    if cfg["seed"] is None:
        raise ConfigError("seed is required")
    if cfg["k"] < 2:
        raise ConfigError("k must be at least 2")
    if cfg["framing"] not in FRAMINGS:
        raise ConfigError(f"framing must be one of {list(FRAMINGS)}")
    _check_list("tasks", cfg["tasks"], DISORDERS)
    _check_list("modalities", cfg["modalities"], MODALITIES)
    _check_list("models", cfg["models"], MODELS)
    if cfg["roc_model"] not in MODELS:
        raise ConfigError(f"roc_model must be one of {list(MODELS)}")
    if cfg["fusion"]["strategy"] not in ("document", "segment"):
        raise ConfigError("fusion.strategy must be 'document' or 'segment'")
    if cfg["fusion"]["precomputed"] and cfg["fusion"]["strategy"] != "document":
        raise ConfigError("fusion.precomputed applies only to the document strategy")
    _positive(cfg, "network.hidden_dim", "network.doc_dim", "network.fused_dim", "network.epochs",
              "network.batch_size", "network.compressor_dim", "network.compressor_hidden",
              "network.compressor_epochs", "emotion.dim", "emotion.hidden_dim", "emotion.epochs",
              "shallow.rf_trees", "shallow.svm_lambda", "shallow.svm_iter", "shallow.knn_k",
              "dsp.frame_ms", "dsp.hop_ms", "dsp.n_mels", "dsp.n_mfcc", "aux.synth_size")
    if cfg["network"]["learning_rate"] < 0 or cfg["emotion"]["finetune_epochs"] < 0:
        raise ConfigError("learning_rate and finetune_epochs must be >= 0")
    if not 0.0 <= cfg["emotion"]["neutral_threshold"] <= 1.0:
        raise ConfigError("emotion.neutral_threshold must lie in [0, 1]")
    if cfg["dsp"]["n_mfcc"] < 12 or cfg["dsp"]["n_mfcc"] > cfg["dsp"]["n_mels"]:
        raise ConfigError("dsp.n_mfcc must lie in [12, n_mels]")
    for name, value in cfg["dims"].items():
        if not isinstance(value, int) or value < 1:
            raise ConfigError(f"dims.{name} must be a positive integer")
    s = cfg["synth"]
    for key in ("docs_per_family", "segments_per_doc", "tokens_per_segment", "duration_s"):
        if len(s[key]) != 2 or s[key][0] > s[key][1] or s[key][0] <= 0:
            raise ConfigError(f"synth.{key} must be [low, high] with 0 < low <= high")
    base = Path(base_dir)
    for section, key in [("", "corpus")] + [("embeddings", k) for k in cfg["embeddings"]] + \
            [("aux", k) for k in ("text", "covarep", "spectrogram")]:
        holder = cfg if not section else cfg[section]
        if holder[key] is None:
            continue
        p = Path(holder[key])
        if not p.is_absolute():
            p = base / p
        if check_paths and not p.exists():
            raise ConfigError(f"{(section + '.') if section else ''}{key}: {p} does not exist")
        holder[key] = str(p)
    return cfg


def load_config(path, check_paths=True):
    path = Path(path)
    try:
        with open(path, encoding="utf-8") as fh:
            user = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
    return resolve_config(user, base_dir=path.parent, check_paths=check_paths)


def canonical_json(cfg):
    return json.dumps(cfg, sort_keys=True, separators=(",", ":"))


def config_hash(cfg):
    return hashlib.sha256(canonical_json(cfg).encode("utf-8")).hexdigest()
