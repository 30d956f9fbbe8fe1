from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import oracles
from dailylog.audio_features import (
    AudioFeatureVector, MfccConfig, delta, extract_audio_features, feature_names, frame_count, hz_to_mel,
    load_wav, log_mel_energies, mel_filterbank, mel_points_hz, mel_to_hz, mfcc_frames,
)
from dailylog.errors import ClipTooShort, InvalidInput
from dailylog.ingest import AudioClip

FS = 16000


def _tone(freq, seconds=1.0, fs=FS, amp=0.5):
    t = np.arange(int(seconds * fs)) / fs
    return AudioClip(fs, amp * np.sin(2 * np.pi * freq * t))


def test_frame_params_default():
    assert MfccConfig().frame_params(FS) == (400, 160, 512)


def test_one_second_frame_count():
    assert mfcc_frames(_tone(440.0)).shape == (98, 20)


@settings(max_examples=200)
@given(st.integers(0, 5000), st.integers(2, 600), st.integers(1, 300))
def test_frame_count_formula(n, frame, hop):
    starts = [s for s in range(0, n, hop) if s + frame <= n]
    assert frame_count(n, frame, hop) == len(starts)


def test_mel_scale_round_trip():
    f = np.linspace(0, 8000, 17)
    np.testing.assert_allclose(mel_to_hz(hz_to_mel(f)), f, atol=1e-9)
    assert hz_to_mel(1000.0) == pytest.approx(999.98, abs=0.01)


def test_filterbank_matches_oracle():
    got = mel_filterbank(40, 512, FS)
    want, pts = oracles.filterbank(40, 512, FS)
    np.testing.assert_allclose(got, want, atol=1e-12)
    np.testing.assert_allclose(mel_points_hz(40, FS), pts, rtol=1e-12)


@pytest.mark.parametrize("j", [10, 15, 20, 25, 30])
def test_tone_at_filter_center_peaks_there(j):
    center = mel_points_hz(40, FS)[j + 1]
    energies = log_mel_energies(_tone(center))
    assert set(np.argmax(energies, axis=1).tolist()) == {j}


def test_delta_of_ramp_is_slope():
    k = 0.37
    frames = (k * np.arange(30.0))[:, None] * np.ones((1, 4)) + np.arange(4.0)
    d = delta(frames, 2)
    np.testing.assert_allclose(d[2:-2], k, atol=1e-9)


def test_delta_matches_oracle():
    rng = np.random.default_rng(5)
    frames = rng.normal(size=(12, 5))
    np.testing.assert_allclose(delta(frames, 2), oracles.regression_delta(frames.tolist(), 2), atol=1e-12)


def test_delta_rejects_bad_input():
    with pytest.raises(InvalidInput):
        delta(np.zeros((0, 3)))
    with pytest.raises(InvalidInput):
        delta(np.zeros((4, 3)), 0)


def test_mfcc_matches_direct_dft_and_dct():
    rng = np.random.default_rng(8)
    for _ in range(20):
        fs = 8000
        x = rng.normal(0, 0.2, int(rng.integers(200, 520)))
        got = mfcc_frames(AudioClip(fs, x))
        want = np.array(oracles.mfcc(x.tolist(), fs))
        np.testing.assert_allclose(got, want, rtol=1e-8, atol=1e-8)


def test_vector_layout_on_random_clips():
    rng = np.random.default_rng(2)
    for _ in range(50):
        fs = int(rng.choice([8000, 16000, 22050]))
        clip = AudioClip(fs, rng.uniform(-1, 1, int(rng.integers(fs // 20, fs // 2))))
        v = extract_audio_features(clip)
        assert v.values.shape == (120,)
        assert np.all(np.isfinite(v.values))
    names = feature_names()
    assert len(names) == 120 and names[0] == "mean_mfcc_01" and names[-1] == "std_delta2_20"


def test_stationary_tone_has_flat_dynamics():
    v = extract_audio_features(_tone(1000.0)).values
    assert np.max(np.abs(v[20:60])) < 1e-6


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**31), st.floats(0.2, 4.0))
def test_gain_shifts_only_first_coefficient(seed, k):
    # energies stay well above the log floor for this amplitude range
    x = np.random.default_rng(seed).normal(0, 0.04, 3200)
    a = mfcc_frames(AudioClip(FS, x))
    b = mfcc_frames(AudioClip(FS, k * x))
    shift = b[:, 0] - a[:, 0]
    np.testing.assert_allclose(shift, 2 * np.log(k) * np.sqrt(40), atol=1e-6)
    np.testing.assert_allclose(b[:, 1:], a[:, 1:], atol=1e-6)
    va, vb = extract_audio_features(AudioClip(FS, x)).values, extract_audio_features(AudioClip(FS, k * x)).values
    np.testing.assert_allclose(vb[20:60], va[20:60], atol=1e-6)


def test_clip_shorter_than_a_frame():
    with pytest.raises(ClipTooShort):
        extract_audio_features(AudioClip(FS, np.zeros(100)))


def test_silence_hits_log_floor():
    e = log_mel_energies(AudioClip(FS, np.zeros(FS // 10)))
    assert np.all(e == np.log(1e-10))


def test_json_round_trip():
    v = extract_audio_features(_tone(300.0, 0.2))
    np.testing.assert_array_equal(AudioFeatureVector.from_json(v.to_json()).values, v.values)
    with pytest.raises(InvalidInput):
        AudioFeatureVector(np.zeros(119))


def test_load_wav(tmp_path):
    from scipy.io import wavfile

    x = (0.25 * np.sin(2 * np.pi * 440 * np.arange(800) / 8000) * 32767).astype(np.int16)
    wavfile.write(tmp_path / "a.wav", 8000, x)
    clip = load_wav(tmp_path / "a.wav")
    assert clip.sample_rate_hz == 8000
    assert np.max(np.abs(clip.samples)) == pytest.approx(0.25, abs=1e-3)
