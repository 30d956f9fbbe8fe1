"""Synthetic labeled day generator following fixed composition rules.

Randomness comes from numpy's PCG64 bit generator seeded through
``SeedSequence(seed)``; three spawned child streams drive labels, signals and
physiology independently, so switching signal synthesis off never changes the
label sequence. Output is identical across platforms for the same seed.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from .config import load_config_file
from .errors import ConfigError, MissingBaseline
from .ingest import AudioChunk, AudioClip, GeoFix, PhysioSnapshot, SensorRecord, SensorWindow, TriAxisSeries
from .vocab import SCENES, SYNTH_CLASSES

NIGHT_END_HOUR = 8  # hours 0..7 use the night prior
GRAVITY = 9.81

OUTDOOR_SCENES = {"beach", "city_center", "forest_path", "park", "residential_area"}
# rough ambient loudness per scene, dBFS of the synthesized noise floor
SCENE_LEVEL_DB = {
    "beach": -32, "bus": -28, "cafe_restaurant": -30, "car": -34, "city_center": -24,
    "forest_path": -48, "grocery_store": -36, "home": -58, "library": -66, "metro_station": -22,
    "office": -50, "park": -42, "residential_area": -46, "train": -26, "tram": -27,
}


def _default_night():
    return {"lying": 0.80, "sitting": 0.05, "standing": 0.05, "walking": 0.05, "stairs": 0.05}


def _default_day():
    return {"lying": 0.05, "sitting": 0.50, "standing": 0.20, "walking": 0.15, "stairs": 0.10}


def _default_transitions():
    return {"lying": ("sitting", "standing"), "stairs": ("walking",), "sitting": ("standing", "lying")}


@dataclass
class SynthConfig:
    night_prior: dict = field(default_factory=_default_night)
    day_prior: dict = field(default_factory=_default_day)
    transition_map: dict = field(default_factory=_default_transitions)
    window_s: float = 120.0
    seed: int = 1
    start_unix_ts: int = 1704067200  # 2024-01-01 00:00 UTC
    utc_offset_minutes: int = 0
    duration_s: float = 86400.0
    # physiology
    hr_baseline: dict = field(default_factory=lambda: {
        "lying": 60.0, "sitting": 70.0, "standing": 75.0, "walking": 95.0, "stairs": 110.0})
    eda_setpoint: dict = field(default_factory=lambda: {
        "lying": 0.3, "sitting": 0.4, "standing": 0.5, "walking": 1.0, "stairs": 1.4})
    temp_setpoint: dict = field(default_factory=lambda: {
        "lying": 36.5, "sitting": 36.6, "standing": 36.6, "walking": 36.9, "stairs": 37.0})
    hr_ar_phi: float = 0.8
    hr_noise_sd: float = 2.0
    hr_smoothing: float = 0.6
    eda_smoothing: float = 0.3
    temp_smoothing: float = 0.2
    # locations
    n_locations: int = 6
    move_prob_day: float = 0.03
    move_prob_night: float = 0.002
    base_lat: float = 43.7044
    base_lon: float = -72.2887
    # signals; a zero clip length disables that modality
    imu_rate_hz: float = 50.0
    imu_clip_s: float = 10.0
    audio_rate_hz: float = 8000.0
    audio_clip_s: float = 0.25
    # (start_s, end_s, class) blocks that override the rules
    forced_blocks: list = field(default_factory=list)

    def __post_init__(self):
        for name in ("night_prior", "day_prior"):
            prior = getattr(self, name)
            if set(prior) != set(SYNTH_CLASSES):
                raise ConfigError(name, f"must give a probability for each of {SYNTH_CLASSES}")
            if any(p < 0 for p in prior.values()):
                raise ConfigError(name, "probabilities must be >= 0")
            total = math.fsum(prior.values())
            if abs(total - 1.0) > 1e-12:
                raise ConfigError(name, f"probabilities sum to {total:g}, expected 1")
        for prev, succ in self.transition_map.items():
            if prev not in SYNTH_CLASSES or not set(succ) <= set(SYNTH_CLASSES) or not succ:
                raise ConfigError("transition_map", f"bad entry {prev!r}: {succ!r}")
        if not self.window_s > 0:
            raise ConfigError("window_s", "must be > 0")
        if not 0 <= self.hr_ar_phi < 1:
            raise ConfigError("hr_ar_phi", "must be in [0, 1)")
        if self.n_locations < 2:
            raise ConfigError("n_locations", "need at least 2 locations")
        for start, end, cls in self.forced_blocks:
            if cls not in SYNTH_CLASSES or not start < end:
                raise ConfigError("forced_blocks", f"bad block {(start, end, cls)!r}")

    @classmethod
    def from_dict(cls, d: dict) -> "SynthConfig":
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known
        if unknown:
            raise ConfigError(sorted(unknown)[0], "unknown synth config key")
        d = dict(d)
        if "transition_map" in d:
            d["transition_map"] = {k: tuple(v) for k, v in d["transition_map"].items()}
        if "forced_blocks" in d:
            d["forced_blocks"] = [tuple(b) for b in d["forced_blocks"]]
        return cls(**d)

    @classmethod
    def load(cls, path) -> "SynthConfig":
        """Read a JSON or TOML file; TOML may nest keys under ``[synth]``."""
        d = load_config_file(path)
        return cls.from_dict(d.get("synth", d))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["transition_map"] = {k: list(v) for k, v in self.transition_map.items()}
        d["forced_blocks"] = [list(b) for b in self.forced_blocks]
        return d


@dataclass(frozen=True, eq=False)
class SynthSample:
    window: SensorWindow
    label: str          # coarse class
    activity: str       # label in the activity vocabulary
    scene: str
    location_id: int
    location_changed: bool = False
    forced: bool = False

    def to_dict(self) -> dict:
        return {
            "unix_ts": self.window.start_unix_ts,
            "label": self.label,
            "activity": self.activity,
            "scene": self.scene,
            "location_id": self.location_id,
            "location_changed": self.location_changed,
            "forced": self.forced,
            "window": window_to_dict(self.window),
        }


def _r(v: float) -> float:
    return round(float(v), 6)


def window_to_dict(w: SensorWindow) -> dict:
    d: dict = {"start_unix_ts": w.start_unix_ts, "end_unix_ts": w.end_unix_ts}
    d["imu"] = {
        mod: {"sample_rate_hz": s.sample_rate_hz, "x": [_r(v) for v in s.x], "y": [_r(v) for v in s.y],
              "z": [_r(v) for v in s.z]}
        for mod, s in w.imu.items()
    }
    d["audio"] = None if w.audio is None else {
        "sample_rate_hz": w.audio.sample_rate_hz, "samples": [_r(v) for v in w.audio.samples]}
    d["geo"] = None if w.geo is None else {
        "lat": w.geo.lat, "lon": w.geo.lon, "pressure_hpa": w.geo.pressure_hpa,
        "wifi_ssids": list(w.geo.wifi_ssids), "bt_macs": list(w.geo.bt_macs)}
    d["light_lux"] = w.light_lux
    d["ambient_temp_c"] = w.ambient_temp_c
    d["physio"] = None if w.physio is None else {k: _r(v) for k, v in w.physio.to_dict().items()}
    return d


# ---------------------------------------------------------------------------
# Label process


def is_night(civil_hour: int) -> bool:
    return 0 <= civil_hour < NIGHT_END_HOUR


def _draw(probs: dict, rng: np.random.Generator) -> str:
    classes = [c for c in SYNTH_CLASSES if c in probs]
    weights = np.array([probs[c] for c in classes], dtype=float)
    total = weights.sum()
    if total <= 0:
        weights, total = np.ones(len(classes)), float(len(classes))
    idx = int(np.searchsorted(np.cumsum(weights), rng.random() * total, side="right"))
    return classes[min(idx, len(classes) - 1)]


def sample_activity(prev: str | None, civil_hour: int, location_changed: bool, rng: np.random.Generator,
                    cfg: SynthConfig | None = None) -> str:
    """Draw the next coarse class.

    A location change forces walking. Otherwise the hour's prior is restricted
    to the successors allowed after ``prev`` and renormalized.
    """
    if not 0 <= civil_hour <= 23:
        raise ValueError(f"civil_hour must be in 0..23, got {civil_hour}")
    cfg = cfg or _DEFAULT_CFG
    if location_changed:
        return "walking"
    prior = cfg.night_prior if is_night(civil_hour) else cfg.day_prior
    allowed = cfg.transition_map.get(prev) if prev is not None else None
    if allowed:
        prior = {c: prior[c] for c in allowed}
    return _draw(prior, rng)


def transition_violations(samples, cfg: SynthConfig | None = None) -> list[int]:
    """Indices ``i`` where ``samples[i-1] -> samples[i]`` breaks a rule."""
    cfg = cfg or _DEFAULT_CFG
    bad = []
    for i in range(1, len(samples)):
        prev, cur = samples[i - 1], samples[i]
        if cur.forced or prev.forced:
            continue
        if cur.location_changed:
            if cur.label != "walking":
                bad.append(i)
            continue
        allowed = cfg.transition_map.get(prev.label)
        if allowed and cur.label not in allowed:
            bad.append(i)
    return bad


def _forced_class(cfg: SynthConfig, offset_s: float) -> str | None:
    for start, end, cls in cfg.forced_blocks:
        if start <= offset_s < end:
            return cls
    return None


# ---------------------------------------------------------------------------
# Signals


def imu_pattern(cls: str, n: int, fs: float, rng: np.random.Generator) -> TriAxisSeries:
    """Accelerometer clip (m/s^2) with a class-specific posture and rhythm."""
    t = np.arange(n) / fs
    jitter = rng.normal(0.0, 0.15, 3)
    phase = rng.uniform(0, 2 * np.pi)
    if cls == "lying":
        base = np.array([0.4, 0.3, 9.79]) + jitter
        osc = np.outer(0.04 * np.sin(2 * np.pi * 0.25 * t + phase), [0, 0, 1])
        noise = 0.03
    elif cls == "sitting":
        base = np.array([2.5, 8.9, 3.0]) + jitter
        osc = np.outer(0.06 * np.sin(2 * np.pi * 0.2 * t + phase), [1, 0, 0])
        noise = 0.05
    elif cls == "standing":
        base = np.array([0.3, 9.78, 0.6]) + jitter
        osc = np.outer(0.15 * np.sin(2 * np.pi * 0.3 * t + phase), [1, 0, 1])
        noise = 0.08
    elif cls in ("walking", "stairs"):
        f = rng.uniform(1.7, 2.1) if cls == "walking" else rng.uniform(1.35, 1.65)
        amp = rng.uniform(2.2, 2.8) if cls == "walking" else rng.uniform(3.0, 3.6)
        base = np.array([0.5, 9.7, 1.0 if cls == "walking" else 2.2]) + jitter
        w = 2 * np.pi * f * t + phase
        osc = np.stack([
            0.9 * np.sin(w / 2),
            amp * np.sin(w) + 0.3 * amp * np.sin(2 * w),
            0.5 * amp * np.sin(w + 1.0),
        ], axis=1)
        noise = 0.3 if cls == "walking" else 0.4
    else:
        raise ValueError(f"no IMU pattern for {cls!r}")
    xyz = base + osc + rng.normal(0.0, noise, (n, 3))
    return TriAxisSeries(fs, xyz[:, 0], xyz[:, 1], xyz[:, 2])


def audio_pattern(scene: str, n: int, fs: float, rng: np.random.Generator) -> AudioClip:
    level = 10 ** (SCENE_LEVEL_DB[scene] / 20.0)
    tone_hz = 120.0 + 60.0 * SCENES.index(scene)
    t = np.arange(n) / fs
    x = level * (rng.normal(0.0, 1.0, n) + 0.7 * np.sin(2 * np.pi * tone_hz * t + rng.uniform(0, 2 * np.pi)))
    return AudioClip(fs, np.clip(x, -1.0, 1.0))


def location_coords(cfg: SynthConfig, location_id: int) -> tuple[float, float]:
    # locations sit about 1.1 km apart on a north-south line
    return cfg.base_lat + 0.01 * location_id, cfg.base_lon


def location_ssid(location_id: int) -> str:
    return f"loc{location_id}-ap"


def _environment(scene: str, hour: int, rng: np.random.Generator) -> tuple[float, float]:
    outdoor = scene in OUTDOOR_SCENES
    night = hour < 6 or hour >= 21
    if outdoor:
        lux = rng.uniform(5.0, 20.0) if night else rng.uniform(2000.0, 20000.0)
        temp = 14.0 + 8.0 * math.sin(math.pi * (hour - 9) / 12.0) + rng.normal(0, 0.5)
    else:
        lux = rng.uniform(0.5, 3.0) if night else rng.uniform(150.0, 600.0)
        temp = 22.0 + rng.normal(0, 0.5)
    return float(lux), float(temp)


# ---------------------------------------------------------------------------
# Day synthesis


def synthesize_day(cfg: SynthConfig, physio: bool = True) -> list[SynthSample]:
    label_rng, signal_rng, physio_rng = (
        np.random.Generator(np.random.PCG64(s)) for s in np.random.SeedSequence(cfg.seed).spawn(3))
    n = int(math.ceil(cfg.duration_s / cfg.window_s - 1e-9))
    samples = []
    prev: str | None = None
    loc, scene = 0, "home"
    for i in range(n):
        start = cfg.start_unix_ts + i * cfg.window_s
        offset = i * cfg.window_s
        hour = int(((start + cfg.utc_offset_minutes * 60) // 3600) % 24)
        changed = False
        if i > 0:
            p_move = cfg.move_prob_night if is_night(hour) else cfg.move_prob_day
            if label_rng.random() < p_move:
                loc = int((loc + 1 + label_rng.integers(0, cfg.n_locations - 1)) % cfg.n_locations)
                scene = str(label_rng.choice([s for s in SCENES if s != scene]))
                changed = True
        forced = _forced_class(cfg, offset)
        cls = forced or sample_activity(prev, hour, changed, label_rng, cfg)
        activity = cls
        if cls == "stairs":
            activity = "ascending_stairs" if label_rng.random() < 0.5 else "descending_stairs"
        window = _make_window(cfg, start, cls, scene, loc, hour, signal_rng)
        samples.append(SynthSample(window, cls, activity, scene, loc, changed, forced is not None))
        prev = cls
    return attach_physio(samples, cfg, physio_rng) if physio else samples


def _make_window(cfg, start, cls, scene, loc, hour, rng) -> SensorWindow:
    imu = {}
    n_imu = int(round(cfg.imu_clip_s * cfg.imu_rate_hz))
    if n_imu > 0:
        imu["imu_accel"] = imu_pattern(cls, n_imu, cfg.imu_rate_hz, rng)
    audio = None
    n_audio = int(round(cfg.audio_clip_s * cfg.audio_rate_hz))
    if n_audio > 0:
        audio = audio_pattern(scene, n_audio, cfg.audio_rate_hz, rng)
    lat, lon = location_coords(cfg, loc)
    pressure = 1013.25 - 0.4 * loc + float(rng.normal(0, 0.05))
    lux, temp = _environment(scene, hour, rng)
    return SensorWindow(
        start_unix_ts=float(start), end_unix_ts=float(start + cfg.window_s), imu=imu, audio=audio,
        geo=GeoFix(lat, lon, pressure, (location_ssid(loc),)), light_lux=lux, ambient_temp_c=temp,
    )


def attach_physio(seq, cfg: SynthConfig, rng: np.random.Generator | None = None):
    """Add HR/IBI/EDA/TEMP that trend with the activity sequence.

    HR = smoothed activity baseline + AR(1) noise with coefficient
    ``hr_ar_phi`` and stationary sd ``hr_noise_sd``, clipped at 3 sd.
    EDA and temperature relax exponentially toward per-activity set points.
    IBI is exactly 60000 / HR.
    """
    for table in ("hr_baseline", "eda_setpoint", "temp_setpoint"):
        missing = [c for c in {s.label for s in seq} if c not in getattr(cfg, table)]
        if missing:
            raise MissingBaseline(table, f"no value for {sorted(missing)}")
    if rng is None:
        rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(cfg.seed).spawn(3)[2]))
    if not seq:
        return []
    sd = cfg.hr_noise_sd
    innov_sd = sd * math.sqrt(1.0 - cfg.hr_ar_phi**2)
    first = seq[0].label
    hr_level, eda, temp = cfg.hr_baseline[first], cfg.eda_setpoint[first], cfg.temp_setpoint[first]
    e = float(rng.normal(0.0, sd))
    out = []
    for i, s in enumerate(seq):
        if i:
            hr_level += cfg.hr_smoothing * (cfg.hr_baseline[s.label] - hr_level)
            e = cfg.hr_ar_phi * e + float(rng.normal(0.0, innov_sd))
            eda += cfg.eda_smoothing * (cfg.eda_setpoint[s.label] - eda)
            temp += cfg.temp_smoothing * (cfg.temp_setpoint[s.label] - temp)
        e = min(max(e, -3 * sd), 3 * sd)
        hr = hr_level + e
        snap = PhysioSnapshot(
            eda_microsiemens=max(0.01, eda + float(rng.normal(0, 0.02))),
            hr_bpm=hr,
            ibi_ms=60000.0 / hr,
            temp_celsius=temp + float(rng.normal(0, 0.02)),
        )
        out.append(replace(s, window=replace(s.window, physio=snap)))
    return out


def write_jsonl(samples, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for s in samples:
            fh.write(json.dumps(s.to_dict(), separators=(",", ":")) + "\n")


# ---------------------------------------------------------------------------
# Streams for the end-to-end pipeline


def samples_to_records(samples) -> list[SensorRecord]:
    """Flatten synthesized windows into a raw record stream.

    Every record of window ``k`` is stamped inside ``[start_k, end_k)`` and the
    first record sits exactly at ``start_k``, so re-windowing with the same
    window length recovers the original partition.
    """
    records = []
    for s in samples:
        w = s.window
        t0 = w.start_unix_ts
        records.append(SensorRecord(t0, "gps", (w.geo.lat, w.geo.lon)))
        records.append(SensorRecord(t0, "barometer", (w.geo.pressure_hpa,)))
        records.append(SensorRecord(t0, "wifi", w.geo.wifi_ssids))
        records.append(SensorRecord(t0, "light", (w.light_lux,)))
        records.append(SensorRecord(t0, "temperature", (w.ambient_temp_c,)))
        if w.audio is not None:
            records.append(SensorRecord(t0, "audio", AudioChunk(w.audio.sample_rate_hz, tuple(w.audio.samples))))
        for mod, series in w.imu.items():
            fs = series.sample_rate_hz
            for i in range(len(series)):
                records.append(SensorRecord(t0 + i / fs, mod, (series.x[i], series.y[i], series.z[i])))
        if w.physio is not None:
            records.append(SensorRecord(t0 + w.duration_s / 2, "physio", w.physio))
    return records


def write_gazetteer(cfg: SynthConfig, path) -> None:
    """Gazetteer CSV naming every synthetic location."""
    lines = ["lat,lon,street,district,city,country,place_type"]
    for loc in range(cfg.n_locations):
        lat, lon = location_coords(cfg, loc)
        place = "residence" if loc == 0 else f"site {loc}"
        lines.append(f"{lat},{lon},{loc + 1} Main Street,District {loc},Hanover,US,{place}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def fit_centroid_model(cfg: SynthConfig | None = None, per_class: int = 40, seed: int = 0):
    """Nearest-centroid model on synthesized accelerometer windows for every coarse class."""
    from .imu_features import imu_block
    from .inference import CentroidModel

    cfg = cfg or _DEFAULT_CFG
    rng = np.random.Generator(np.random.PCG64(seed))
    n = int(round(cfg.imu_clip_s * cfg.imu_rate_hz)) or 500
    feats, labels = [], []
    for cls in SYNTH_CLASSES:
        label = "ascending_stairs" if cls == "stairs" else cls
        for _ in range(per_class):
            feats.append(imu_block(imu_pattern(cls, n, cfg.imu_rate_hz, rng)))
            labels.append(label)
    return CentroidModel.fit(feats, labels)


_DEFAULT_CFG = SynthConfig()
