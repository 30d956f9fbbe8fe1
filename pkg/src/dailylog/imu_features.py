"""26-feature motion block per IMU sensor.

Each block is computed from one tri-axis series::

    time domain (9)   on the magnitude series
    frequency (6)     log band energies x5 + spectral entropy, on the magnitude
    autocorr (2)      dominant lag (s) and its normalized autocorrelation
    axis (9)          per-axis mean/std and pairwise Pearson correlation

Degenerate inputs (zero spread) yield 0 for skewness, kurtosis, entropies
and correlations so downstream text never contains NaN.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import EmptySeries, NoImuData, TooShort, InvalidInput
from .ingest import IMU_MODALITIES, TriAxisSeries

TIME_NAMES = (
    "mean", "std", "skewness", "kurtosis", "max", "min", "iqr", "signal_entropy", "temporal_entropy",
)
FREQ_NAMES = tuple(f"band{i}_log_energy" for i in range(1, 6)) + ("spectral_entropy",)
AUTOCORR_NAMES = ("dominant_lag_s", "dominant_peak_value")
AXIS_NAMES = ("mean_x", "mean_y", "mean_z", "std_x", "std_y", "std_z", "corr_xy", "corr_xz", "corr_yz")
BLOCK_NAMES = TIME_NAMES + FREQ_NAMES + AUTOCORR_NAMES + AXIS_NAMES
BLOCK_SIZE = len(BLOCK_NAMES)  # 26

SENSOR_PREFIX = {"imu_accel": "accel", "imu_gyro": "gyro", "imu_mag": "mag"}
POWER_FLOOR = 1e-12


@dataclass(frozen=True)
class ImuConfig:
    sensors: tuple[str, ...] = IMU_MODALITIES
    n_hist_bins: int = 16
    n_bands: int = 5
    lag_min_s: float = 0.25
    lag_max_s: float = 3.0

    def __post_init__(self):
        bad = [s for s in self.sensors if s not in IMU_MODALITIES]
        if bad or not self.sensors:
            raise InvalidInput(f"sensors must be a non-empty subset of {IMU_MODALITIES}")
        if self.n_bands != 5:
            # the feature names and prompt text are fixed at five bands
            raise InvalidInput("n_bands is fixed at 5")
        if not 0 < self.lag_min_s < self.lag_max_s:
            raise InvalidInput("need 0 < lag_min_s < lag_max_s")


def magnitude_series(s: TriAxisSeries) -> np.ndarray:
    if len(s.x) == 0:
        raise EmptySeries("tri-axis series is empty")
    return np.sqrt(s.x * s.x + s.y * s.y + s.z * s.z)


def _hist_entropy(values: np.ndarray, n_bins: int) -> float:
    lo, hi = float(values.min()), float(values.max())
    if lo == hi:
        return 0.0
    counts, _ = np.histogram(values, bins=n_bins, range=(lo, hi))
    p = counts[counts > 0] / values.size
    return float(-np.sum(p * np.log(p)))


def time_domain_features(m, n_bins: int = 16) -> np.ndarray:
    m = np.asarray(m, dtype=float)
    if m.size < 2:
        raise TooShort("time-domain features need at least 2 samples")
    mu = float(np.mean(m))
    centered = m - mu
    sd = float(np.sqrt(np.mean(centered * centered)))
    if np.ptp(m) == 0:
        skew = kurt = 0.0
        sd = 0.0
    else:
        skew = float(np.mean(centered**3)) / sd**3
        kurt = float(np.mean(centered**4)) / sd**4 - 3.0
    q1, q3 = np.percentile(m, [25.0, 75.0])
    return np.array([
        mu, sd, skew, kurt, float(m.max()), float(m.min()), float(q3 - q1),
        _hist_entropy(m, n_bins), _hist_entropy(np.abs(np.diff(m)), n_bins),
    ])


def power_spectrum(m, fs: float) -> tuple[np.ndarray, np.ndarray]:
    """Hann-windowed one-sided power over bins 1..N//2, i.e. (0, fs/2]."""
    m = np.asarray(m, dtype=float)
    n = m.size
    centered = np.zeros(n) if np.ptp(m) == 0 else m - np.mean(m)
    spec = np.fft.rfft(centered * np.hanning(n))
    k = np.arange(1, n // 2 + 1)
    return k * fs / n, (np.abs(spec[k]) ** 2) / n


def frequency_domain_features(m, fs: float, n_bands: int = 5) -> np.ndarray:
    m = np.asarray(m, dtype=float)
    n = m.size
    if n < 8:
        raise TooShort("frequency features need at least 8 samples")
    if not fs > 0:
        raise InvalidInput("fs must be > 0")
    _, power = power_spectrum(m, fs)
    k = np.arange(1, n // 2 + 1)
    # band index = floor(f / (fs / (2 * n_bands))) with f = k * fs / n, in integers
    band = np.minimum((k * 2 * n_bands) // n, n_bands - 1)
    band_power = np.bincount(band, weights=power, minlength=n_bands)
    total = power.sum()
    if total > 0:
        p = power[power > 0] / total
        entropy = float(-np.sum(p * np.log(p)))
    else:
        entropy = 0.0
    return np.append(np.log(band_power + POWER_FLOOR), entropy)


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def lag_bounds(n: int, fs: float, lag_min_s: float = 0.25, lag_max_s: float = 3.0) -> tuple[int, int]:
    lo = max(1, _round_half_up(lag_min_s * fs))
    hi = min(_round_half_up(lag_max_s * fs), n - 1)
    return lo, hi


def autocorrelation_features(m, fs: float, lag_min_s: float = 0.25, lag_max_s: float = 3.0) -> np.ndarray:
    m = np.asarray(m, dtype=float)
    n = m.size
    if not fs > 0:
        raise InvalidInput("fs must be > 0")
    if n < fs * 0.5:
        raise TooShort(f"autocorrelation needs at least {fs * 0.5:g} samples, got {n}")
    lo, hi = lag_bounds(n, fs, lag_min_s, lag_max_s)
    if lo > hi:
        raise TooShort(f"lag search range [{lo}, {hi}] is empty")
    if np.ptp(m) == 0:
        return np.array([lo / fs, 0.0])
    centered = m - m.mean()
    nfft = 1 << (2 * n - 1).bit_length()
    spec = np.fft.rfft(centered, nfft)
    ac = np.fft.irfft(spec.real**2 + spec.imag**2, nfft)[:n]
    r = ac[lo: hi + 1] / ac[0]
    best = int(np.argmax(r))
    return np.array([(lo + best) / fs, float(r[best])])


def _corr(a: np.ndarray, b: np.ndarray) -> float:
    if np.ptp(a) == 0 or np.ptp(b) == 0:
        return 0.0
    ca, cb = a - a.mean(), b - b.mean()
    r = float(np.sum(ca * cb) / math.sqrt(float(np.sum(ca * ca)) * float(np.sum(cb * cb))))
    return min(1.0, max(-1.0, r))


def axis_features(s: TriAxisSeries) -> np.ndarray:
    if len(s.x) < 2:
        raise TooShort("axis features need at least 2 samples")
    axes = (s.x, s.y, s.z)
    means = [float(np.mean(a)) for a in axes]
    stds = [0.0 if np.ptp(a) == 0 else float(np.std(a)) for a in axes]
    corrs = [_corr(s.x, s.y), _corr(s.x, s.z), _corr(s.y, s.z)]
    return np.array(means + stds + corrs)


def imu_block(s: TriAxisSeries, cfg: ImuConfig = ImuConfig()) -> np.ndarray:
    """All 26 features of one sensor, in ``BLOCK_NAMES`` order."""
    m = magnitude_series(s)
    fs = s.sample_rate_hz
    return np.concatenate([
        time_domain_features(m, cfg.n_hist_bins),
        frequency_domain_features(m, fs, cfg.n_bands),
        autocorrelation_features(m, fs, cfg.lag_min_s, cfg.lag_max_s),
        axis_features(s),
    ])


@dataclass(frozen=True, eq=False)
class ImuFeatureVector:
    values: np.ndarray
    mask: tuple[int, int, int]

    @property
    def sensors(self) -> list[str]:
        return [mod for mod, present in zip(IMU_MODALITIES, self.mask) if present]

    @property
    def names(self) -> list[str]:
        return [f"{SENSOR_PREFIX[mod]}.{n}" for mod in self.sensors for n in BLOCK_NAMES]

    def block(self, modality: str) -> np.ndarray:
        sensors = self.sensors
        if modality not in sensors:
            raise KeyError(modality)
        i = sensors.index(modality)
        return self.values[i * BLOCK_SIZE: (i + 1) * BLOCK_SIZE]

    def to_json(self) -> str:
        return json.dumps({"names": self.names, "values": [float(v) for v in self.values], "mask": list(self.mask)})

    @classmethod
    def from_json(cls, text: str) -> "ImuFeatureVector":
        d = json.loads(text)
        return cls(np.array(d["values"], dtype=float), tuple(d["mask"]))


def extract_imu_features(w, cfg: ImuConfig = ImuConfig()) -> ImuFeatureVector:
    """Concatenate per-sensor blocks (accel, gyro, mag order) for a window."""
    blocks, mask = [], []
    for mod in IMU_MODALITIES:
        series = w.imu.get(mod) if mod in cfg.sensors else None
        mask.append(int(series is not None))
        if series is not None:
            blocks.append(imu_block(series, cfg))
    if not blocks:
        raise NoImuData(f"window at {w.start_unix_ts} has no IMU data")
    return ImuFeatureVector(np.concatenate(blocks), tuple(mask))
