"""Acoustic feature frontend: per-frame cepstra with delta/delta-delta,
pitch, voicing and loudness, corpus z-normalization and a binary frame
file format.

A frame covers window_ms of audio every hop_ms. The default layout is
10 cepstra + 10 deltas + 10 delta-deltas + pitch + voicing + loudness
= 33 dimensions; n_cepstra is configurable (15 gives a 48-dim layout).
"""

import struct
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, FormatError

STD_FLOOR = 1e-6

FEATURE_MAGIC = b"EFEA"
FEATURE_VERSION = 1
_HEADER = struct.Struct("<4sIIQ")  # magic, version, dim, frame count


@dataclass
class FrameConfig:
    sample_rate: int = 16000
    window_ms: float = 25.0
    hop_ms: float = 10.0
    n_mels: int = 26
    n_fft: int = 0            # 0 -> next power of two >= window samples
    n_cepstra: int = 10
    delta_halfwin: int = 2
    smooth_len: int = 15
    preemphasis: float = 0.97
    pitch_fmin: float = 50.0
    pitch_fmax: float = 500.0
    voicing_threshold: float = 0.3

    def __post_init__(self):
        if not self.window_ms > self.hop_ms > 0:
            raise ConfigError("need window_ms > hop_ms > 0")
        if self.n_fft and self.n_fft < self.window_samples:
            raise ConfigError("n_fft smaller than the analysis window")
        if self.n_cepstra > self.n_mels:
            raise ConfigError("n_cepstra cannot exceed n_mels")

    @property
    def window_samples(self):
        return int(round(self.sample_rate * self.window_ms / 1000.0))

    @property
    def hop_samples(self):
        return int(round(self.sample_rate * self.hop_ms / 1000.0))

    @property
    def fft_size(self):
        if self.n_fft:
            return self.n_fft
        n = 1
        while n < self.window_samples:
            n *= 2
        return n

    @property
    def dim(self):
        return 3 * self.n_cepstra + 3


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


def mel_filterbank(n_mels, n_fft, sample_rate):
    """Triangular filters (n_mels, n_fft//2+1), unit peak, spanning 0..sr/2."""
    n_bins = n_fft // 2 + 1
    freqs = np.arange(n_bins) * sample_rate / n_fft
    edges = mel_to_hz(np.linspace(hz_to_mel(0.0), hz_to_mel(sample_rate / 2.0), n_mels + 2))
    fb = np.zeros((n_mels, n_bins))
    for k in range(n_mels):
        lo, mid, hi = edges[k], edges[k + 1], edges[k + 2]
        up = (freqs - lo) / max(mid - lo, 1e-12)
        down = (hi - freqs) / max(hi - mid, 1e-12)
        fb[k] = np.clip(np.minimum(up, down), 0.0, None)
    return fb


def mel_filter_centers(n_mels, sample_rate):
    """Center frequency (Hz) of each mel filter."""
    edges = mel_to_hz(np.linspace(hz_to_mel(0.0), hz_to_mel(sample_rate / 2.0), n_mels + 2))
    return edges[1:-1]


def dct_matrix(n_out, n_in):
    """Orthonormal DCT-II rows (n_out, n_in)."""
    m = np.arange(n_in)
    mat = np.cos(np.pi * np.outer(np.arange(n_out), 2 * m + 1) / (2.0 * n_in))
    mat *= np.sqrt(2.0 / n_in)
    mat[0] *= np.sqrt(0.5)
    return mat


def frame_count(n_samples, cfg):
    """Number of frames for an audio length; 0 when shorter than one window."""
    w, h = cfg.window_samples, cfg.hop_samples
    if n_samples < w:
        return 0
    return (n_samples - w) // h + 1


def moving_average(x, size):
    """Centered moving average; the window shrinks at the edges so a
    constant sequence stays constant."""
    x = np.asarray(x, dtype=np.float64)
    n = x.shape[0]
    half = size // 2
    csum = np.concatenate([[0.0], np.cumsum(x)])
    lo = np.clip(np.arange(n) - half, 0, n)
    hi = np.clip(np.arange(n) + size - half, 0, n)
    return (csum[hi] - csum[lo]) / (hi - lo)


def _delta(block, halfwin):
    """Linear-regression delta filter over +-halfwin frames, edge-replicated."""
    padded = np.pad(block, ((halfwin, halfwin), (0, 0)), mode="edge")
    den = 2.0 * sum(j * j for j in range(1, halfwin + 1))
    out = np.zeros_like(block)
    for j in range(1, halfwin + 1):
        out += j * (padded[halfwin + j:halfwin + j + block.shape[0]]
                    - padded[halfwin - j:halfwin - j + block.shape[0]])
    return out / den


def _pitch_voicing(frame, cfg):
    """Autocorrelation pitch tracker on one mean-removed raw frame.

    Returns (pitch_hz, voicing); pitch is 0 when the peak clarity is
    below cfg.voicing_threshold or the frame is (near) constant.
    """
    y = frame - frame.mean()
    w = y.shape[0]
    energy = float(y @ y)
    if energy < 1e-10:
        return 0.0, 0.0
    lag_min = max(1, int(cfg.sample_rate / cfg.pitch_fmax))
    lag_max = min(w - 1, int(cfg.sample_rate / cfg.pitch_fmin))
    if lag_min >= lag_max:
        return 0.0, 0.0
    nfft = 1
    while nfft < 2 * w:
        nfft *= 2
    spec = np.fft.rfft(y, nfft)
    ac = np.fft.irfft(spec * np.conj(spec), nfft)[:w]
    sq = np.concatenate([[0.0], np.cumsum(y * y)])
    lags = np.arange(lag_min, lag_max + 1)
    e_head = sq[w - lags]                # energy of y[0 : w-lag]
    e_tail = sq[w] - sq[lags]            # energy of y[lag : w]
    clarity = ac[lags] / np.sqrt(e_head * e_tail + 1e-20)
    best = int(np.argmax(clarity))
    v = float(np.clip(clarity[best], 0.0, 1.0))
    if v < cfg.voicing_threshold:
        return 0.0, v
    return cfg.sample_rate / float(lags[best]), v


def extract_features(audio, cfg=None):
    """Audio samples -> (n_frames, cfg.dim) float64 feature matrix.

    Cepstra: pre-emphasis, Hann window, magnitude spectrum, mel filterbank,
    log, DCT-II. Deltas come from a +-halfwin regression filter. Pitch,
    voicing and loudness tracks are smoothed with a length smooth_len
    moving average.
    """
    if cfg is None:
        cfg = FrameConfig()
    audio = np.asarray(audio, dtype=np.float64)
    if audio.ndim != 1:
        raise FormatError(f"expected mono audio, got shape {audio.shape}")
    n = frame_count(audio.shape[0], cfg)
    if n == 0:
        warnings.warn("audio shorter than one analysis window; no frames extracted")
        return np.zeros((0, cfg.dim))

    w, hop = cfg.window_samples, cfg.hop_samples
    emphasized = np.empty_like(audio)
    emphasized[0] = audio[0]
    emphasized[1:] = audio[1:] - cfg.preemphasis * audio[:-1]

    window = np.hanning(w)
    fb = mel_filterbank(cfg.n_mels, cfg.fft_size, cfg.sample_rate)
    dct = dct_matrix(cfg.n_cepstra, cfg.n_mels)

    cep = np.zeros((n, cfg.n_cepstra))
    pitch = np.zeros(n)
    voicing = np.zeros(n)
    loudness = np.zeros(n)
    for i in range(n):
        start = i * hop
        raw = audio[start:start + w]
        mag = np.abs(np.fft.rfft(emphasized[start:start + w] * window, cfg.fft_size))
        mel = np.maximum(fb @ mag, 1e-10)
        cep[i] = dct @ np.log(mel)
        pitch[i], voicing[i] = _pitch_voicing(raw, cfg)
        loudness[i] = np.log(float(raw @ raw) + 1e-12)

    out = np.zeros((n, cfg.dim))
    nc = cfg.n_cepstra
    out[:, :nc] = cep
    out[:, nc:2 * nc] = _delta(cep, cfg.delta_halfwin)
    out[:, 2 * nc:3 * nc] = _delta(out[:, nc:2 * nc], cfg.delta_halfwin)
    out[:, 3 * nc] = moving_average(pitch, cfg.smooth_len)
    out[:, 3 * nc + 1] = moving_average(voicing, cfg.smooth_len)
    out[:, 3 * nc + 2] = moving_average(loudness, cfg.smooth_len)
    return out


# ---------------------------------------------------------------------------
# Normalization
# ---------------------------------------------------------------------------


@dataclass
class NormStats:
    mean: np.ndarray
    std: np.ndarray
    count: int = 0


class NormAccumulator:
    """Streaming per-dimension mean/variance; partial accumulators merge,
    so corpora can be folded in parallel."""

    def __init__(self, dim):
        self.count = 0
        self.mean = np.zeros(dim)
        self.m2 = np.zeros(dim)

    def update(self, frames):
        frames = np.asarray(frames, dtype=np.float64)
        if frames.size == 0:
            return
        n = frames.shape[0]
        mean = frames.mean(axis=0)
        m2 = ((frames - mean) ** 2).sum(axis=0)
        self._combine(n, mean, m2)

    def merge(self, other):
        self._combine(other.count, other.mean, other.m2)

    def _combine(self, n, mean, m2):
        if n == 0:
            return
        total = self.count + n
        delta = mean - self.mean
        self.mean = self.mean + delta * (n / total)
        self.m2 = self.m2 + m2 + delta * delta * (self.count * n / total)
        self.count = total

    def finalize(self):
        if self.count == 0:
            raise ConfigError("cannot compute normalization stats from an empty corpus")
        std = np.sqrt(self.m2 / self.count)   # population std
        return NormStats(mean=self.mean.copy(),
                         std=np.maximum(std, STD_FLOOR),
                         count=self.count)


def compute_norm_stats(feature_seqs):
    """Per-dimension mean/std over a corpus (training split only)."""
    acc = None
    for frames in feature_seqs:
        frames = np.asarray(frames, dtype=np.float64)
        if acc is None:
            acc = NormAccumulator(frames.shape[1])
        acc.update(frames)
    if acc is None:
        raise ConfigError("cannot compute normalization stats from an empty corpus")
    return acc.finalize()


def normalize(frames, stats):
    return (np.asarray(frames, dtype=np.float64) - stats.mean) / stats.std


def denormalize(frames, stats):
    return np.asarray(frames, dtype=np.float64) * stats.std + stats.mean


# ---------------------------------------------------------------------------
# Binary frame file ("EFEA"): header + little-endian float32, row-major
# ---------------------------------------------------------------------------


def write_features(path, frames):
    """Write frames as float32; pass float32 data for a bitwise round trip."""
    frames = np.ascontiguousarray(frames, dtype=np.float32)
    if frames.ndim != 2:
        raise FormatError(f"expected a (frames, dim) matrix, got shape {frames.shape}")
    with open(path, "wb") as f:
        f.write(_HEADER.pack(FEATURE_MAGIC, FEATURE_VERSION, frames.shape[1], frames.shape[0]))
        if frames.size:
            f.write(frames.astype("<f4").tobytes())


def read_features(path):
    """Read an EFEA file back as a float32 (frames, dim) matrix."""
    with open(path, "rb") as f:
        head = f.read(_HEADER.size)
        if len(head) < _HEADER.size:
            raise FormatError(f"{path}: truncated header at byte {len(head)} "
                              f"(need {_HEADER.size})")
        magic, version, dim, count = _HEADER.unpack(head)
        if magic != FEATURE_MAGIC:
            raise FormatError(f"{path}: bad magic {magic!r} at byte 0")
        if version != FEATURE_VERSION:
            raise FormatError(f"{path}: unsupported version {version} at byte 4")
        expected = dim * count * 4
        payload = f.read(expected)
        if len(payload) != expected:
            raise FormatError(f"{path}: truncated payload at byte "
                              f"{_HEADER.size + len(payload)} (need {_HEADER.size + expected})")
        if f.read(1):
            raise FormatError(f"{path}: trailing bytes after frame {count} "
                              f"(byte {_HEADER.size + expected})")
    data = np.frombuffer(payload, dtype="<f4")
    return data.reshape(count, dim).copy()


def read_feature_header(path):
    """(dim, frame_count) from an EFEA file without reading the payload."""
    with open(path, "rb") as f:
        head = f.read(_HEADER.size)
    if len(head) < _HEADER.size:
        raise FormatError(f"{path}: truncated header at byte {len(head)}")
    magic, version, dim, count = _HEADER.unpack(head)
    if magic != FEATURE_MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r} at byte 0")
    if version != FEATURE_VERSION:
        raise FormatError(f"{path}: unsupported version {version} at byte 4")
    return dim, count
