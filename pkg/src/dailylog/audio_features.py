"""120-dimensional ambient audio descriptor built on MFCCs.

Layout of the output vector (20 values each)::

    mean(mfcc) | mean(delta) | mean(delta2) | std(mfcc) | std(delta) | std(delta2)

Frames overlap: ``frame_ms`` long, advanced by ``hop_ms``; a tail shorter than
one frame is dropped. Coefficient 1 is the 0th (energy) cepstral term.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
from scipy.fft import dct
from scipy.io import wavfile

from .errors import ClipTooShort, InvalidInput
from .ingest import AudioClip

LOG_FLOOR = 1e-10


@dataclass(frozen=True)
class MfccConfig:
    n_mfcc: int = 20
    n_mels: int = 40
    frame_ms: float = 25.0
    hop_ms: float = 10.0
    preemphasis: float = 0.97
    delta_halfwidth: int = 2

    def __post_init__(self):
        if not 1 <= self.n_mfcc <= self.n_mels:
            raise InvalidInput("need 1 <= n_mfcc <= n_mels")
        if not self.frame_ms > self.hop_ms > 0:
            raise InvalidInput("need frame_ms > hop_ms > 0")
        if self.delta_halfwidth < 1:
            raise InvalidInput("delta_halfwidth must be >= 1")

    def frame_params(self, fs: float) -> tuple[int, int, int]:
        """(frame length, hop, FFT size) in samples."""
        frame = int(round(fs * self.frame_ms / 1000.0))
        hop = int(round(fs * self.hop_ms / 1000.0))
        if frame < 2 or hop < 1:
            raise InvalidInput(f"sample rate {fs} too low for the configured frame/hop")
        return frame, hop, 1 << (frame - 1).bit_length()


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=float) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=float) / 2595.0) - 1.0)


def mel_points_hz(n_mels: int, fs: float) -> np.ndarray:
    """Filter edge/center frequencies: ``n_mels + 2`` points from 0 to fs/2."""
    return mel_to_hz(np.linspace(0.0, hz_to_mel(fs / 2.0), n_mels + 2))


def mel_filterbank(n_mels: int, n_fft: int, fs: float) -> np.ndarray:
    """Triangular filters (unit peak) evaluated at the rfft bin frequencies."""
    pts = mel_points_hz(n_mels, fs)
    freqs = np.arange(n_fft // 2 + 1) * fs / n_fft
    lo, mid, hi = pts[:-2, None], pts[1:-1, None], pts[2:, None]
    rising = (freqs - lo) / (mid - lo)
    falling = (hi - freqs) / (hi - mid)
    return np.maximum(0.0, np.minimum(rising, falling))


def frame_count(n_samples: int, frame: int, hop: int) -> int:
    return 0 if n_samples < frame else (n_samples - frame) // hop + 1


def _frames(clip: AudioClip, cfg: MfccConfig) -> tuple[np.ndarray, int]:
    x = np.asarray(clip.samples, dtype=float)
    frame, hop, n_fft = cfg.frame_params(clip.sample_rate_hz)
    n = frame_count(x.size, frame, hop)
    if n == 0:
        raise ClipTooShort(f"clip of {x.size} samples is shorter than one {frame}-sample frame")
    y = np.empty_like(x)
    y[0] = x[0]
    y[1:] = x[1:] - cfg.preemphasis * x[:-1]
    idx = np.arange(frame)[None, :] + hop * np.arange(n)[:, None]
    return y[idx] * np.hanning(frame), n_fft


def log_mel_energies(clip: AudioClip, cfg: MfccConfig = MfccConfig()) -> np.ndarray:
    """Per-frame log filterbank energies, shape (frames, n_mels)."""
    frames, n_fft = _frames(clip, cfg)
    power = np.abs(np.fft.rfft(frames, n_fft, axis=1)) ** 2 / n_fft
    energies = power @ mel_filterbank(cfg.n_mels, n_fft, clip.sample_rate_hz).T
    return np.log(np.maximum(energies, LOG_FLOOR))


def mfcc_frames(clip: AudioClip, cfg: MfccConfig = MfccConfig()) -> np.ndarray:
    """MFCC matrix of shape (frames, n_mfcc)."""
    return dct(log_mel_energies(clip, cfg), type=2, norm="ortho", axis=1)[:, : cfg.n_mfcc]


def delta(frames, n: int = 2) -> np.ndarray:
    """Regression deltas across frames with edge replication."""
    c = np.asarray(frames, dtype=float)
    if n < 1:
        raise InvalidInput("delta halfwidth must be >= 1")
    if c.ndim != 2 or c.shape[0] == 0:
        raise InvalidInput("delta needs a non-empty (frames, coeffs) matrix")
    t = c.shape[0]
    padded = np.pad(c, ((n, n), (0, 0)), mode="edge")
    out = np.zeros_like(c)
    for k in range(1, n + 1):
        out += k * (padded[n + k: n + k + t] - padded[n - k: n - k + t])
    return out / (2.0 * sum(k * k for k in range(1, n + 1)))


@dataclass(frozen=True, eq=False)
class AudioFeatureVector:
    values: np.ndarray

    def __post_init__(self):
        if self.values.shape != (120,):
            raise InvalidInput(f"audio feature vector must have 120 values, got {self.values.shape}")

    @property
    def names(self) -> list[str]:
        return feature_names()

    def to_json(self) -> str:
        return json.dumps({"names": self.names, "values": [float(v) for v in self.values]})

    @classmethod
    def from_json(cls, text: str) -> "AudioFeatureVector":
        return cls(np.array(json.loads(text)["values"], dtype=float))


def feature_names(n_mfcc: int = 20) -> list[str]:
    return [
        f"{stat}_{group}_{i:02d}"
        for stat in ("mean", "std")
        for group in ("mfcc", "delta", "delta2")
        for i in range(1, n_mfcc + 1)
    ]


def extract_audio_features(clip: AudioClip, cfg: MfccConfig = MfccConfig()) -> AudioFeatureVector:
    if cfg.n_mfcc != 20:
        raise InvalidInput("the 120-value layout needs n_mfcc = 20")
    c = mfcc_frames(clip, cfg)
    d1 = delta(c, cfg.delta_halfwidth)
    d2 = delta(d1, cfg.delta_halfwidth)
    groups = (c, d1, d2)
    return AudioFeatureVector(np.concatenate([g.mean(axis=0) for g in groups] + [g.std(axis=0) for g in groups]))


def load_wav(path) -> AudioClip:
    """Read a mono PCM16 or float32 WAV as a normalized clip."""
    fs, data = wavfile.read(path)
    if data.ndim != 1:
        raise InvalidInput(f"{path}: expected mono audio, got {data.shape[1]} channels")
    if data.dtype == np.int16:
        samples = data.astype(float) / 32768.0
    elif data.dtype.kind == "f":
        samples = np.clip(data.astype(float), -1.0, 1.0)
    else:
        raise InvalidInput(f"{path}: unsupported sample format {data.dtype}")
    return AudioClip(float(fs), samples)
