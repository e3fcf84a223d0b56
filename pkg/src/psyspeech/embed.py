"""Segment text/audio representations.

Pre-trained encoders are outside this package: their outputs arrive as
embedding files.  Anything missing from a table is filled by a
deterministic stub encoder so that no token is ever silently dropped.
"""

import math
from collections import Counter
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

DEFAULT_DIMS = {"lm": 1024, "subword": 100, "docvec": 100, "wavenet": 16, "vggish": 128}

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_MASK64 = (1 << 64) - 1


class EmbeddingError(ValueError):
    pass


# ---------------------------------------------------------------- FeatureVector


@dataclass(frozen=True)
class FeatureVector:
    """Dense vector with a schema of contiguous named blocks."""

    values: np.ndarray
    schema: tuple  # ((name, offset, length), ...)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64).reshape(-1)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "schema", tuple((str(n), int(o), int(k)) for n, o, k in self.schema))
        offset = 0
        names = set()
        for name, off, length in self.schema:
            if off != offset:
                raise EmbeddingError(f"block {name!r} at offset {off}, expected {offset}")
            if name in names:
                raise EmbeddingError(f"duplicate block {name!r}")
            names.add(name)
            offset += length
        if offset != v.size:
            raise EmbeddingError(f"schema covers {offset} values, vector has {v.size}")

    @classmethod
    def single(cls, name, values):
        values = np.asarray(values, dtype=np.float64).reshape(-1)
        return cls(values, ((name, 0, values.size),))

    @classmethod
    def concat(cls, parts):
        """Concatenate ``(name, array)`` pairs or FeatureVectors (whose blocks are kept)."""
        blocks, arrays, offset = [], [], 0
        for part in parts:
            if isinstance(part, FeatureVector):
                for name, off, length in part.schema:
                    blocks.append((name, offset + off, length))
                arrays.append(part.values)
                offset += part.values.size
            else:
                name, arr = part
                arr = np.asarray(arr, dtype=np.float64).reshape(-1)
                blocks.append((name, offset, arr.size))
                arrays.append(arr)
                offset += arr.size
        values = np.concatenate(arrays) if arrays else np.zeros(0)
        return cls(values, tuple(blocks))

    def __len__(self):
        return self.values.size

    @property
    def names(self):
        return [b[0] for b in self.schema]

    def block(self, name):
        for n, off, length in self.schema:
            if n == name:
                return self.values[off : off + length]
        raise KeyError(name)


# ---------------------------------------------------------------- stub encoder


def fnv1a64(data):
    h = _FNV_OFFSET
    for byte in data:
        h ^= byte
        h = (h * _FNV_PRIME) & _MASK64
    return h


def splitmix64(seed, n):
    """First ``n`` outputs of SplitMix64 seeded with ``seed`` (uint64 array)."""
    with np.errstate(over="ignore"):
        k = np.arange(1, n + 1, dtype=np.uint64)
        z = np.uint64(seed) + k * np.uint64(0x9E3779B97F4A7C15)
        z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
        return z ^ (z >> np.uint64(31))


@lru_cache(maxsize=65536)
def _stub(name, token, dim):
    seed = fnv1a64(f"{name}\x00{token}".encode("utf-8"))
    m = (dim + 1) // 2
    bits = splitmix64(seed, 2 * m)
    u = (bits >> np.uint64(11)).astype(np.float64) * 2.0**-53
    u1 = 1.0 - u[:m]  # (0, 1]
    u2 = u[m:]
    r = np.sqrt(-2.0 * np.log(u1))
    z = np.concatenate([r * np.cos(2 * np.pi * u2), r * np.sin(2 * np.pi * u2)])[:dim]
    z = z / np.linalg.norm(z)
    z.setflags(write=False)
    return z


def stub_encode(name, token, dim):
    """Deterministic unit vector for ``(name, token)``.

    FNV-1a 64 of ``name NUL token`` seeds SplitMix64; pairs of outputs go
    through Box-Muller to give ``dim`` normals, which are then normalised.
    """
    if dim <= 0:
        raise EmbeddingError("dim must be positive")
    return _stub(str(name), str(token), int(dim)).copy()


# ---------------------------------------------------------------- tables


@dataclass(frozen=True)
class EmbeddingSpec:
    name: str
    dim: int

    def __post_init__(self):
        if self.dim <= 0:
            raise EmbeddingError(f"{self.name}: dim must be positive")


class EmbeddingTable:
    """Key -> vector map for one encoder; missing keys fall back to the stub."""

    def __init__(self, spec, vectors=None):
        self.spec = spec
        self._vectors = {}
        for key, vec in (vectors or {}).items():
            vec = np.asarray(vec, dtype=np.float64).reshape(-1)
            if vec.size != spec.dim:
                raise EmbeddingError(f"{spec.name}[{key!r}] has dim {vec.size}, expected {spec.dim}")
            if not np.all(np.isfinite(vec)):
                raise EmbeddingError(f"{spec.name}[{key!r}] has non-finite values")
            vec.setflags(write=False)
            self._vectors[key] = vec

    @property
    def name(self):
        return self.spec.name

    @property
    def dim(self):
        return self.spec.dim

    def __contains__(self, key):
        return key in self._vectors

    def __len__(self):
        return len(self._vectors)

    def keys(self):
        return self._vectors.keys()

    def lookup(self, key):
        if key in self._vectors:
            return self._vectors[key].copy()
        return stub_encode(self.spec.name, key, self.spec.dim)


def load_embedding_file(path):
    """Read ``#name=<n> dim=<d>`` header then ``key,v0,...`` rows (CSV or TSV)."""
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip()
        if not header.startswith("#"):
            raise EmbeddingError(f"{path}: missing '#name=... dim=...' header")
        fields = dict(item.split("=", 1) for item in header[1:].split())
        try:
            spec = EmbeddingSpec(fields["name"], int(fields["dim"]))
        except (KeyError, ValueError) as exc:
            raise EmbeddingError(f"{path}: bad header {header!r}") from exc
        vectors = {}
        for lineno, line in enumerate(fh, start=2):
            line = line.rstrip("\n")
            if not line:
                continue
            sep = "\t" if "\t" in line else ","
            key, *vals = line.split(sep)
            if len(vals) != spec.dim:
                raise EmbeddingError(f"{path}:{lineno}: {len(vals)} values, expected {spec.dim}")
            if key in vectors:
                raise EmbeddingError(f"{path}:{lineno}: duplicate key {key!r}")
            vectors[key] = [float(v) for v in vals]
    return EmbeddingTable(spec, vectors)


def save_embedding_file(table, path):
    from .io import atomic_write_text

    lines = [f"#name={table.name} dim={table.dim}"]
    for key in sorted(table.keys()):
        lines.append(",".join([key] + [repr(float(v)) for v in table.lookup(key)]))
    atomic_write_text(path, "\n".join(lines) + "\n")


def average_tokens(table, tokens):
    """Mean of per-token vectors (OOV tokens go through the stub encoder)."""
    if len(tokens) == 0:
        raise EmbeddingError("cannot average an empty token list")
    return np.mean([table.lookup(t) for t in tokens], axis=0)


def segment_vector(table, segment_id, tokens):
    """Segment-keyed entry if the table has one, else the token average."""
    if segment_id in table:
        return table.lookup(segment_id)
    if tokens:
        return average_tokens(table, tokens)
    return stub_encode(table.name, segment_id, table.dim)


# ---------------------------------------------------------------- concatenation


def _check(name, vec, dim):
    vec = np.asarray(vec, dtype=np.float64).reshape(-1)
    if dim is not None and vec.size != dim:
        raise EmbeddingError(f"block {name!r} has dim {vec.size}, expected {dim}")
    return vec


def concat_segment_text(lm, subword, docvec, emotion_text, dims=None, emotion_dim=None):
    """Blocks ``[lm | subword | docvec | emotion_text]``."""
    dims = {**DEFAULT_DIMS, **(dims or {})}
    return FeatureVector.concat([
        ("lm", _check("lm", lm, dims["lm"])),
        ("subword", _check("subword", subword, dims["subword"])),
        ("docvec", _check("docvec", docvec, dims["docvec"])),
        ("emotion_text", _check("emotion_text", emotion_text, emotion_dim)),
    ])


def concat_segment_audio(wavenet, vggish, dsp_features, emotion_audio, dims=None, emotion_dim=None):
    """Blocks ``[wavenet | vggish | dsp | emotion_audio]``; ``dsp_features``
    may be a FeatureVector, which is flattened into the single ``dsp`` block."""
    dims = {**DEFAULT_DIMS, **(dims or {})}
    dsp_vals = dsp_features.values if isinstance(dsp_features, FeatureVector) else dsp_features
    return FeatureVector.concat([
        ("wavenet", _check("wavenet", wavenet, dims["wavenet"])),
        ("vggish", _check("vggish", vggish, dims["vggish"])),
        ("dsp", _check("dsp", dsp_vals, None)),
        ("emotion_audio", _check("emotion_audio", emotion_audio, emotion_dim)),
    ])


# ---------------------------------------------------------------- baselines


class BowVectorizer:
    """Raw term counts over a vocabulary fitted on training documents."""

    def fit(self, docs):
        vocab = sorted({t for doc in docs for t in doc})
        if not vocab:
            raise EmbeddingError("empty vocabulary")
        self.vocab_ = {t: i for i, t in enumerate(vocab)}
        return self

    def counts(self, docs):
        X = np.zeros((len(docs), len(self.vocab_)))
        for r, doc in enumerate(docs):
            for t, c in Counter(doc).items():
                j = self.vocab_.get(t)
                if j is not None:
                    X[r, j] = c
        return X

    def transform(self, docs):
        return self.counts(docs)

    def fit_transform(self, docs):
        return self.fit(docs).transform(docs)


class TfidfVectorizer(BowVectorizer):
    """tf * (log((1+N)/(1+df)) + 1), rows L2-normalised."""

    def fit(self, docs):
        super().fit(docs)
        df = np.zeros(len(self.vocab_))
        for doc in docs:
            for t in set(doc):
                df[self.vocab_[t]] += 1
        n = len(docs)
        self.idf_ = np.array([math.log((1 + n) / (1 + d)) + 1.0 for d in df])
        return self

    def transform(self, docs):
        X = self.counts(docs) * self.idf_
        norms = np.linalg.norm(X, axis=1, keepdims=True)
        return np.where(norms > 0, X / np.where(norms > 0, norms, 1.0), 0.0)


def bow_vectorize(train_docs, docs=None):
    v = BowVectorizer().fit(train_docs)
    return v.transform(train_docs if docs is None else docs)


def tfidf_vectorize(train_docs, docs=None):
    v = TfidfVectorizer().fit(train_docs)
    return v.transform(train_docs if docs is None else docs)
