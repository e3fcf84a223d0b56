"""Acoustic features: framing, Mel spectrogram, MFCCs with statistics,
per-frame time-domain features and a COVAREP-like frame feature matrix.
"""

import wave
from dataclasses import dataclass

import numpy as np

from .embed import FeatureVector

MFCC_STATS = ("mean", "std", "range", "skewness", "kurtosis")
TIME_FEATURES = (
    "pitch_hz", "energy", "zero_crossing_rate", "voicing_prob",
    "peak_slope", "naq_proxy", "jitter_proxy", "shimmer_proxy",
)
PITCH_MIN_HZ = 60.0
PITCH_MAX_HZ = 400.0
VOICING_THRESHOLD = 0.5
LOG_EPS = 1e-10


class AudioError(ValueError):
    pass


@dataclass(frozen=True)
class AudioBuffer:
    samples: np.ndarray
    sample_rate_hz: int

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=np.float64)
        if s.ndim != 1 or s.size == 0:
            raise AudioError("audio must be a nonempty 1-D array")
        if np.max(np.abs(s)) > 1.0:
            raise AudioError("samples must lie in [-1, 1]")
        if int(self.sample_rate_hz) <= 0:
            raise AudioError("sample rate must be positive")
        object.__setattr__(self, "samples", s)
        object.__setattr__(self, "sample_rate_hz", int(self.sample_rate_hz))

    @property
    def duration_s(self):
        return self.samples.size / self.sample_rate_hz


@dataclass(frozen=True)
class FrameConfig:
    frame_len_ms: float = 25.0
    hop_ms: float = 10.0
    window: str = "hann"

    def __post_init__(self):
        if not 0 < self.hop_ms <= self.frame_len_ms:
            raise ValueError("need 0 < hop_ms <= frame_len_ms")
        if self.window not in ("hann", "hamming", "rectangular"):
            raise ValueError(f"unknown window {self.window!r}")

    def lengths(self, sr):
        return int(round(self.frame_len_ms * sr / 1000.0)), int(round(self.hop_ms * sr / 1000.0))


@dataclass(frozen=True)
class MelSpectrogram:
    matrix: np.ndarray  # frames x n_mels, power
    mel_edges_hz: np.ndarray  # n_mels + 2 edges


@dataclass(frozen=True)
class MfccBlock:
    per_frame: np.ndarray  # frames x n_mfcc
    stats: np.ndarray  # n_mfcc x 5, columns as MFCC_STATS

    def stats_vector(self):
        """Statistics flattened coefficient-major as a FeatureVector."""
        n = self.stats.shape[0]
        names = [f"mfcc{k}_{s}" for k in range(n) for s in MFCC_STATS]
        return FeatureVector.single("mfcc_stats", self.stats.reshape(-1)), names


@dataclass(frozen=True)
class TimeDomainFeatures:
    pitch_hz: np.ndarray
    energy: np.ndarray
    zero_crossing_rate: np.ndarray
    voicing_prob: np.ndarray
    peak_slope: np.ndarray
    naq_proxy: np.ndarray
    jitter_proxy: np.ndarray
    shimmer_proxy: np.ndarray

    def matrix(self):
        return np.column_stack([getattr(self, n) for n in TIME_FEATURES])


# ---------------------------------------------------------------- io


def read_wav(path, expected_rate=None):
    """Read 16-bit PCM mono WAV into an AudioBuffer."""
    with wave.open(str(path), "rb") as w:
        if w.getnchannels() != 1:
            raise AudioError(f"{path}: expected mono, got {w.getnchannels()} channels")
        if w.getsampwidth() != 2:
            raise AudioError(f"{path}: expected 16-bit PCM")
        sr = w.getframerate()
        raw = w.readframes(w.getnframes())
    if expected_rate is not None and sr != expected_rate:
        raise AudioError(f"{path}: sample rate {sr} != configured {expected_rate} (no resampling)")
    x = np.frombuffer(raw, dtype="<i2").astype(np.float64) / 32768.0
    return AudioBuffer(x, sr)


def write_wav(path, audio):
    x = np.clip(np.round(audio.samples * 32767.0), -32768, 32767).astype("<i2")
    with wave.open(str(path), "wb") as w:
        w.setnchannels(1)
        w.setsampwidth(2)
        w.setframerate(audio.sample_rate_hz)
        w.writeframes(x.tobytes())


# ---------------------------------------------------------------- framing


def _window(kind, n):
    if kind == "hann":
        return np.hanning(n)
    if kind == "hamming":
        return np.hamming(n)
    return np.ones(n)


def frame_signal(audio, cfg=FrameConfig(), window=True):
    """Split into overlapping frames, ``floor((N - L) / H) + 1`` of them.

    With ``window=False`` the raw (rectangular) frames are returned.
    """
    L, H = cfg.lengths(audio.sample_rate_hz)
    N = audio.samples.size
    if N < L:
        raise AudioError(f"audio of {N} samples is shorter than one frame ({L})")
    n = (N - L) // H + 1
    idx = np.arange(L)[None, :] + H * np.arange(n)[:, None]
    frames = audio.samples[idx]
    if window:
        frames = frames * _window(cfg.window, L)
    return frames


# ---------------------------------------------------------------- mel


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


def fft_size(frame_len):
    n = 1
    while n < frame_len:
        n *= 2
    return n


def mel_filterbank(n_mels, n_fft, sr, fmin=0.0, fmax=None):
    """Triangular HTK-mel filters with unit peak; returns (filters, edges_hz)."""
    if n_mels < 2:
        raise ValueError("n_mels must be >= 2")
    fmax = sr / 2.0 if fmax is None else fmax
    edges = mel_to_hz(np.linspace(hz_to_mel(fmin), hz_to_mel(fmax), n_mels + 2))
    freqs = np.arange(n_fft // 2 + 1) * sr / n_fft
    lo, mid, hi = edges[:-2, None], edges[1:-1, None], edges[2:, None]
    up = (freqs[None, :] - lo) / (mid - lo)
    down = (hi - freqs[None, :]) / (hi - mid)
    fb = np.maximum(0.0, np.minimum(up, down))
    return fb, edges


def power_spectrum(frames, n_fft):
    return np.abs(np.fft.rfft(frames, n_fft, axis=1)) ** 2


def mel_spectrogram(audio, cfg=FrameConfig(), n_mels=26):
    frames = frame_signal(audio, cfg)
    n_fft = fft_size(frames.shape[1])
    fb, edges = mel_filterbank(n_mels, n_fft, audio.sample_rate_hz)
    return MelSpectrogram(power_spectrum(frames, n_fft) @ fb.T, edges)


# ---------------------------------------------------------------- mfcc


def dct_matrix(n):
    """Orthonormal DCT-II matrix (rows are basis vectors)."""
    k = np.arange(n)[:, None]
    i = np.arange(n)[None, :]
    D = np.cos(np.pi * k * (2 * i + 1) / (2 * n)) * np.sqrt(2.0 / n)
    D[0] /= np.sqrt(2.0)
    return D


def moment_stats(x):
    """Mean, std, range, skewness, excess kurtosis over axis 0.

    Skewness and kurtosis are defined as 0 where std is 0.
    """
    x = np.asarray(x, dtype=np.float64)
    mean = x.mean(axis=0)
    rng = x.max(axis=0) - x.min(axis=0)
    mean = np.where(rng > 0, mean, x[0])
    d = np.where(rng > 0, x - mean, 0.0)
    std = np.sqrt((d * d).mean(axis=0))
    safe = np.where(std > 0, std, 1.0)
    skew = np.where(std > 0, (d**3).mean(axis=0) / safe**3, 0.0)
    kurt = np.where(std > 0, (d**4).mean(axis=0) / safe**4 - 3.0, 0.0)
    return np.column_stack([mean, std, rng, skew, kurt])


def mfcc(spec, n_mfcc=13):
    M = spec.matrix
    n_mels = M.shape[1]
    if n_mfcc > n_mels:
        raise ValueError(f"n_mfcc ({n_mfcc}) > n_mels ({n_mels})")
    if M.shape[0] < 2:
        raise AudioError("MFCC statistics need at least 2 frames")
    coeffs = np.log(LOG_EPS + M) @ dct_matrix(n_mels)[:n_mfcc].T
    return MfccBlock(coeffs, moment_stats(coeffs))


# ---------------------------------------------------------------- time domain


def _norm_autocorr(frames, max_lag):
    """Normalised autocorrelation r[lag] over the overlapping part of each frame."""
    n, L = frames.shape
    nfft = fft_size(2 * L)
    F = np.fft.rfft(frames, nfft, axis=1)
    ac = np.fft.irfft(F * np.conj(F), nfft, axis=1)[:, : max_lag + 1]
    sq = np.concatenate([np.zeros((n, 1)), np.cumsum(frames**2, axis=1)], axis=1)
    lags = np.arange(max_lag + 1)
    e_head = sq[:, L - lags]  # sum x[0:L-lag]^2
    e_tail = sq[:, L:L + 1] - sq[:, lags]  # sum x[lag:L]^2
    denom = np.sqrt(e_head * e_tail)
    with np.errstate(invalid="ignore", divide="ignore"):
        r = np.where(denom > 1e-20, ac / np.where(denom > 1e-20, denom, 1.0), 0.0)
    return r


def _pitch_track(frames, sr):
    L = frames.shape[1]
    lag_min = max(1, int(np.floor(sr / PITCH_MAX_HZ)))
    lag_max = min(L - 2, int(np.ceil(sr / PITCH_MIN_HZ)))
    r = _norm_autocorr(frames - frames.mean(axis=1, keepdims=True), lag_max + 1)
    seg = r[:, lag_min : lag_max + 1]
    best = seg.max(axis=1)
    # first local peak reaching 90% of the best avoids octave-down errors
    mid = seg[:, 1:-1]
    peaks = (mid >= seg[:, :-2]) & (mid >= seg[:, 2:]) & (mid >= 0.9 * best[:, None])
    cand = np.where(peaks.any(axis=1), peaks.argmax(axis=1) + 1, seg.argmax(axis=1))
    lag = np.minimum(cand + lag_min, r.shape[1] - 2)
    rows = np.arange(r.shape[0])
    y0, y1, y2 = r[rows, lag - 1], r[rows, lag], r[rows, lag + 1]
    denom = y0 - 2 * y1 + y2
    shift = np.where(denom < 0, 0.5 * (y0 - y2) / np.where(denom < 0, denom, -1.0), 0.0)
    voicing = np.where(best > 0, np.clip(y1, 0.0, 1.0), 0.0)
    voiced = voicing >= VOICING_THRESHOLD
    period = np.where(voiced, lag + np.clip(shift, -0.5, 0.5), 0.0)
    pitch = np.where(voiced, sr / np.where(voiced, period, 1.0), 0.0)
    return pitch, voicing, period


def _haar_details(frames, levels=3):
    details = []
    a = frames
    for _ in range(levels):
        n = a.shape[1] // 2 * 2
        even, odd = a[:, 0:n:2], a[:, 1:n:2]
        details.append((even - odd) / np.sqrt(2.0))
        a = (even + odd) / np.sqrt(2.0)
    return details


def _wavelet_maxima(frames, levels=3):
    """Per-level max |detail| and its position in original sample units."""
    d = _haar_details(frames, levels)
    amps = np.column_stack([np.abs(x).max(axis=1) for x in d])
    pos = np.column_stack([np.abs(x).argmax(axis=1) * 2 ** (j + 1) for j, x in enumerate(d)])
    return amps, pos


def _peak_slope(amps):
    """Least-squares slope of log10 band maxima against band index."""
    levels = np.arange(amps.shape[1], dtype=np.float64)
    y = np.log10(np.maximum(amps, 1e-12))
    lc = levels - levels.mean()
    slope = (y - y.mean(axis=1, keepdims=True)) @ lc / (lc @ lc)
    return np.where(amps.max(axis=1) > 0, slope, 0.0)


def time_features(audio, cfg=FrameConfig()):
    """Eight per-frame features: pitch (autocorrelation), energy, ZCR,
    voicing probability, peak slope over Haar-band maxima, and proxies for
    NAQ, jitter and shimmer.

    naq_proxy = peak-to-peak amplitude / (max positive sample slope * pitch
    period in samples); jitter/shimmer proxies are relative frame-to-frame
    changes of pitch period and peak amplitude across consecutive voiced
    frames.  Unvoiced frames get 0 for pitch and the pitch-based proxies.
    """
    sr = audio.sample_rate_hz
    if sr < 8000:
        raise AudioError("time features need sample rate >= 8 kHz")
    frames = frame_signal(audio, cfg, window=False)
    energy = (frames**2).mean(axis=1)
    signs = np.signbit(frames)
    zcr = (signs[:, 1:] != signs[:, :-1]).mean(axis=1)
    pitch, voicing, period = _pitch_track(frames, sr)
    amps, _ = _wavelet_maxima(frames)
    slope = _peak_slope(amps)
    p2p = frames.max(axis=1) - frames.min(axis=1)
    dmax = np.maximum(np.diff(frames, axis=1).max(axis=1), 0.0)
    voiced = pitch > 0
    naq = np.zeros_like(energy)
    ok = voiced & (dmax > 0)
    naq[ok] = p2p[ok] / (dmax[ok] * period[ok])
    peak = np.abs(frames).max(axis=1)
    jitter = np.zeros_like(energy)
    shimmer = np.zeros_like(energy)
    both = voiced[1:] & voiced[:-1]
    k = np.nonzero(both)[0] + 1
    jitter[k] = np.abs(period[k] - period[k - 1]) / period[k]
    shimmer[k] = np.abs(peak[k] - peak[k - 1]) / np.maximum(peak[k], 1e-12)
    return TimeDomainFeatures(pitch, energy, zcr, voicing, slope, naq, jitter, shimmer)


# ---------------------------------------------------------------- covarep-like

COVAREP_COLUMNS = tuple(
    [f"mfcc{k}" for k in range(12)]
    + ["pitch_hz", "voiced", "peak_slope", "naq_proxy", "mdq_proxy"]
)


def _covarep_matrix(audio, cfg, spec, tf):
    cep = mfcc(spec, 12).per_frame
    frames = frame_signal(audio, cfg, window=False)
    _, pos = _wavelet_maxima(frames)
    voiced = tf.pitch_hz > 0
    period = np.where(voiced, audio.sample_rate_hz / np.where(voiced, tf.pitch_hz, 1.0), 0.0)
    mdq = np.where(voiced, pos.std(axis=1) / np.where(voiced, period, 1.0), 0.0)
    return np.column_stack([cep, tf.pitch_hz, voiced.astype(np.float64), tf.peak_slope,
                            tf.naq_proxy, mdq])


COVAREP_SCHEMA = (("mfcc", 0, 12), ("pitch", 12, 1), ("voicing", 13, 1), ("peak_slope", 14, 1),
                  ("naq_proxy", 15, 1), ("mdq_proxy", 16, 1))


def covarep_style_features(audio, cfg=FrameConfig(), n_mels=26):
    """Per-frame matrix with columns ``COVAREP_COLUMNS`` and its block schema.

    mdq_proxy is the spread (std) of the Haar-band maxima positions divided
    by the pitch period, a stand-in for the maxima dispersion quotient.
    """
    spec = mel_spectrogram(audio, cfg, n_mels)
    return _covarep_matrix(audio, cfg, spec, time_features(audio, cfg)), list(COVAREP_SCHEMA)


def _dsp_vector(mfcc_block, tf):
    return FeatureVector.concat([
        ("mfcc_stats", mfcc_block.stats.reshape(-1)),
        ("time_stats", moment_stats(tf.matrix()).reshape(-1)),
    ])


def segment_dsp_vector(audio, cfg=FrameConfig(), n_mels=26, n_mfcc=13):
    """Fixed-length segment summary: the five statistics of each MFCC and
    of each time-domain feature (8 features x 5 stats)."""
    spec = mel_spectrogram(audio, cfg, n_mels)
    return _dsp_vector(mfcc(spec, n_mfcc), time_features(audio, cfg))


@dataclass(frozen=True)
class SegmentAnalysis:
    mel: MelSpectrogram
    mfcc: MfccBlock
    time: TimeDomainFeatures
    covarep: np.ndarray
    dsp_vector: FeatureVector


def analyze_segment(audio, cfg=FrameConfig(), n_mels=26, n_mfcc=13):
    """All per-segment acoustic outputs, computing shared pieces once."""
    spec = mel_spectrogram(audio, cfg, n_mels)
    block = mfcc(spec, n_mfcc)
    tf = time_features(audio, cfg)
    return SegmentAnalysis(spec, block, tf, _covarep_matrix(audio, cfg, spec, tf), _dsp_vector(block, tf))
