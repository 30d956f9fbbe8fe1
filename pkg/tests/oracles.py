"""Deliberately naive reference implementations used as test oracles.

Nothing here imports from ``dailylog``: each feature is recomputed from its
textbook definition with explicit loops or direct sums.
"""

from __future__ import annotations

import cmath
import math
from fractions import Fraction


def magnitude(x, y, z):
    return [math.sqrt(a * a + b * b + c * c) for a, b, c in zip(x, y, z)]


def _mean(v):
    return math.fsum(v) / len(v)


def _moment(v, mu, k):
    return math.fsum((a - mu) ** k for a in v) / len(v)


def percentile(v, q):
    s = sorted(v)
    pos = (len(s) - 1) * q
    lo = int(math.floor(pos))
    hi = min(lo + 1, len(s) - 1)
    return s[lo] + (s[hi] - s[lo]) * (pos - lo)


def hist_entropy(v, n_bins=16):
    lo, hi = min(v), max(v)
    if lo == hi:
        return 0.0
    counts = [0] * n_bins
    width = (hi - lo) / n_bins
    for a in v:
        i = int((a - lo) / width)
        counts[min(i, n_bins - 1)] += 1
    n = len(v)
    return -math.fsum((c / n) * math.log(c / n) for c in counts if c)


def time_features(m, n_bins=16):
    mu = _mean(m)
    var = _moment(m, mu, 2)
    sd = math.sqrt(var)
    if max(m) == min(m):
        skew = kurt = 0.0
        sd = 0.0
    else:
        skew = _moment(m, mu, 3) / sd**3
        kurt = _moment(m, mu, 4) / sd**4 - 3.0
    diffs = [abs(m[i + 1] - m[i]) for i in range(len(m) - 1)]
    return [mu, sd, skew, kurt, max(m), min(m), percentile(m, 0.75) - percentile(m, 0.25),
            hist_entropy(m, n_bins), hist_entropy(diffs, n_bins)]


def hann(n):
    return [0.5 - 0.5 * math.cos(2 * math.pi * j / (n - 1)) for j in range(n)] if n > 1 else [1.0]


def direct_power(m, fs):
    """(k, |X_k|^2 / N) for k = 1..N//2 via a direct DFT of the windowed, centered signal."""
    n = len(m)
    mu = _mean(m) if max(m) != min(m) else m[0]
    w = hann(n)
    xs = [(a - mu) * wj for a, wj in zip(m, w)]
    out = []
    for k in range(1, n // 2 + 1):
        acc = sum(xj * cmath.exp(-2j * math.pi * k * j / n) for j, xj in enumerate(xs))
        out.append((k, abs(acc) ** 2 / n))
    return out


def freq_features(m, fs, n_bands=5):
    n = len(m)
    spec = direct_power(m, fs)
    bands = [0.0] * n_bands
    for k, p in spec:
        # f_k / band_width = (k fs / n) / (fs / (2 n_bands)), evaluated exactly
        b = math.floor(Fraction(k * 2 * n_bands, n))
        bands[min(b, n_bands - 1)] += p
    total = math.fsum(p for _, p in spec)
    ent = 0.0
    if total > 0:
        ent = -math.fsum((p / total) * math.log(p / total) for _, p in spec if p > 0)
    return [math.log(b + 1e-12) for b in bands] + [ent]


def autocorr_features(m, fs, lag_min_s=0.25, lag_max_s=3.0):
    n = len(m)
    lo = max(1, int(math.floor(lag_min_s * fs + 0.5)))
    hi = min(int(math.floor(lag_max_s * fs + 0.5)), n - 1)
    if max(m) == min(m):
        return [lo / fs, 0.0]
    mu = _mean(m)
    c = [a - mu for a in m]
    r0 = math.fsum(a * a for a in c)
    best_lag, best = lo, -math.inf
    for lag in range(lo, hi + 1):
        r = math.fsum(c[i] * c[i + lag] for i in range(n - lag)) / r0
        if r > best:
            best_lag, best = lag, r
    return [best_lag / fs, best]


def pearson(a, b):
    if max(a) == min(a) or max(b) == min(b):
        return 0.0
    ma, mb = _mean(a), _mean(b)
    num = math.fsum((p - ma) * (q - mb) for p, q in zip(a, b))
    den = math.sqrt(math.fsum((p - ma) ** 2 for p in a) * math.fsum((q - mb) ** 2 for q in b))
    return max(-1.0, min(1.0, num / den))


def axis_feats(x, y, z):
    axes = (x, y, z)
    means = [_mean(a) for a in axes]
    stds = [0.0 if max(a) == min(a) else math.sqrt(_moment(a, _mean(a), 2)) for a in axes]
    return means + stds + [pearson(x, y), pearson(x, z), pearson(y, z)]


def imu_block(x, y, z, fs):
    m = magnitude(x, y, z)
    return time_features(m) + freq_features(m, fs) + autocorr_features(m, fs) + axis_feats(x, y, z)


# ---------------------------------------------------------------------------
# Audio


def mel(f):
    return 2595.0 * math.log10(1.0 + f / 700.0)


def inv_mel(m):
    return 700.0 * (10 ** (m / 2595.0) - 1.0)


def filterbank(n_mels, n_fft, fs):
    top = mel(fs / 2)
    pts = [inv_mel(top * i / (n_mels + 1)) for i in range(n_mels + 2)]
    rows = []
    for j in range(n_mels):
        lo, mid, hi = pts[j], pts[j + 1], pts[j + 2]
        row = []
        for k in range(n_fft // 2 + 1):
            f = k * fs / n_fft
            if lo <= f <= mid:
                row.append((f - lo) / (mid - lo))
            elif mid < f <= hi:
                row.append((hi - f) / (hi - mid))
            else:
                row.append(0.0)
        rows.append(row)
    return rows, pts


def dct2_ortho(v):
    n = len(v)
    out = []
    for k in range(n):
        s = math.fsum(v[i] * math.cos(math.pi * k * (2 * i + 1) / (2 * n)) for i in range(n))
        scale = math.sqrt(1.0 / n) if k == 0 else math.sqrt(2.0 / n)
        out.append(scale * s)
    return out


def mfcc(samples, fs, frame_ms=25.0, hop_ms=10.0, n_mels=40, n_mfcc=20, pre=0.97):
    frame = int(round(fs * frame_ms / 1000))
    hop = int(round(fs * hop_ms / 1000))
    n_fft = 1
    while n_fft < frame:
        n_fft *= 2
    y = [samples[0]] + [samples[i] - pre * samples[i - 1] for i in range(1, len(samples))]
    w = hann(frame)
    fb, _ = filterbank(n_mels, n_fft, fs)
    out = []
    start = 0
    while start + frame <= len(y):
        seg = [y[start + j] * w[j] for j in range(frame)] + [0.0] * (n_fft - frame)
        power = []
        for k in range(n_fft // 2 + 1):
            acc = sum(seg[j] * cmath.exp(-2j * math.pi * k * j / n_fft) for j in range(frame))
            power.append(abs(acc) ** 2 / n_fft)
        energies = [max(math.fsum(r[k] * power[k] for k in range(len(power))), 1e-10) for r in fb]
        out.append(dct2_ortho([math.log(e) for e in energies])[:n_mfcc])
        start += hop
    return out


def regression_delta(frames, n=2):
    t = len(frames)
    denom = 2 * sum(k * k for k in range(1, n + 1))

    def at(i):
        return frames[min(max(i, 0), t - 1)]

    return [[math.fsum(k * (at(i + k)[j] - at(i - k)[j]) for k in range(1, n + 1)) / denom
             for j in range(len(frames[0]))] for i in range(t)]


# ---------------------------------------------------------------------------
# Metrics


def macro_prf(counts):
    """Brute-force macro P/R/F over classes with support, using exact fractions."""
    k = len(counts)
    ps, rs, fs = [], [], []
    for i in range(k):
        support = sum(counts[i])
        if support == 0:
            continue
        tp = counts[i][i]
        predicted = sum(counts[r][i] for r in range(k))
        p = Fraction(tp, predicted) if predicted else Fraction(0)
        r = Fraction(tp, support)
        f = 2 * p * r / (p + r) if p + r else Fraction(0)
        ps.append(p)
        rs.append(r)
        fs.append(f)
    n = len(ps)
    return float(sum(ps) / n), float(sum(rs) / n), float(sum(fs) / n)


# ---------------------------------------------------------------------------
# Geodesy


def haversine(lat1, lon1, lat2, lon2, r=6371000.0):
    p1, p2 = math.radians(lat1), math.radians(lat2)
    dp, dl = p2 - p1, math.radians(lon2 - lon1)
    h = math.sin(dp / 2) ** 2 + math.cos(p1) * math.cos(p2) * math.sin(dl / 2) ** 2
    return 2 * r * math.asin(math.sqrt(h))
