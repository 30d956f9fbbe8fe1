"""Per-stage wall time for one window: IMU features, MFCC, annotation, prompt render, mock inference."""

from __future__ import annotations

import argparse
import statistics
import time

import numpy as np

from dailylog.annotate import annotate_window
from dailylog.audio_features import extract_audio_features
from dailylog.geoloc import StructuredAddress
from dailylog.imu_features import extract_imu_features
from dailylog.inference import complete, BackendConfig
from dailylog.ingest import AudioClip, GeoFix, PhysioSnapshot, SensorWindow, TriAxisSeries, to_civil_time
from dailylog.promptgen import ContextBundle, build_context_prompt
from dailylog.synth import fit_centroid_model


def make_window(rng, window_s, fs_imu, fs_audio, audio_s):
    n = int(window_s * fs_imu)
    imu = {s: TriAxisSeries(fs_imu, *rng.normal(size=(3, n))) for s in ("imu_accel", "imu_gyro", "imu_mag")}
    audio = AudioClip(fs_audio, rng.uniform(-0.3, 0.3, int(audio_s * fs_audio)))
    return SensorWindow(0.0, window_s, imu=imu, audio=audio, light_lux=200.0, ambient_temp_c=22.0,
                        geo=GeoFix(43.7, -72.3, pressure_hpa=1001.0), physio=PhysioSnapshot(hr_bpm=71.0))


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--windows", type=int, default=30)
    ap.add_argument("--window-s", type=float, default=120.0)
    ap.add_argument("--imu-hz", type=float, default=100.0)
    ap.add_argument("--audio-hz", type=int, default=16000)
    ap.add_argument("--audio-s", type=float, default=1.0)
    args = ap.parse_args(argv)

    rng = np.random.default_rng(0)
    model = fit_centroid_model()
    addr = StructuredAddress("1 Elm St", "North", "Hanover", "US", "residence")
    stages = {k: [] for k in ("imu", "audio", "annotate", "prompt", "mock_infer", "total")}
    for i in range(args.windows):
        w = make_window(rng, args.window_s, args.imu_hz, args.audio_hz, args.audio_s)
        t = [time.perf_counter()]
        imu = extract_imu_features(w)
        t.append(time.perf_counter())
        audio = extract_audio_features(w.audio)
        t.append(time.perf_counter())
        env = annotate_window(w)
        t.append(time.perf_counter())
        prompt = build_context_prompt(ContextBundle(to_civil_time(1704100000 + 120 * i), addr, imu, audio, env,
                                                    w.physio))
        t.append(time.perf_counter())
        complete(prompt, BackendConfig(), model)
        t.append(time.perf_counter())
        for k, a, b in zip(stages, t, t[1:]):
            stages[k].append(b - a)
        stages["total"].append(t[-1] - t[0])

    print(f"{'stage':<11} {'median_ms':>10} {'p90_ms':>8}")
    for k, v in stages.items():
        v = sorted(v[1:])
        print(f"{k:<11} {statistics.median(v) * 1e3:>10.2f} {v[int(0.9 * (len(v) - 1))] * 1e3:>8.2f}")


if __name__ == "__main__":
    main()
