"""End-to-end processing: windows -> features -> prompt -> inference -> log entries.

Run configuration (JSON or TOML; relative paths resolve against the config
file's directory)::

    window_s = 120                 # seconds per window
    summary_window_h = 2           # trailing hours per summary
    max_summary_entries = 120
    template_version = "context-v1"
    utc_offset_minutes = 0
    seed = 0                       # only used to fit a default mock model

    [paths]
    input = "stream.jsonl"         # required
    input_format = "jsonl"         # jsonl | csv
    log_store = "log.jsonl"        # required
    summary_out = "summary.json"   # optional
    gazetteer = "places.csv"       # optional offline geocoder
    centroid_model = "model.json"  # optional; mock backend fits one if absent
    beacons = "beacons.json"       # optional SSID/MAC -> building/floor/room

    [backend]                      # see inference.BackendConfig
    kind = "mock"

    [geocode]
    url = "http://localhost:8080/reverse"   # optional; env DAILYLOG_GEOCODE_URL wins
    radius_m = 250
    timeout_s = 5

    [imu]
    sensors = ["imu_accel", "imu_gyro", "imu_mag"]
"""

from __future__ import annotations

import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

from .annotate import EnvAnnotation, annotate_window
from .audio_features import AudioFeatureVector, MfccConfig, extract_audio_features
from .errors import BackendError, ClipTooShort, ConfigError, NoCoverage, NoImuData, ProviderError
from .geoloc import Gazetteer, HttpGeocodeProvider, ReverseGeocoder, StructuredAddress, load_beacon_map, \
    refine_with_beacons, GEOCODE_URL_ENV
from .imu_features import ImuConfig, ImuFeatureVector, extract_imu_features
from .inference import BackendConfig, CentroidModel, complete, parse_context_response
from .ingest import SensorWindow, parse_stream, to_civil_time, window_align
from .logbook import ActivityLogEntry, LogStore, point_flags
from .promptgen import ContextBundle, build_context_prompt
from .config import load_config_file

log = logging.getLogger(__name__)


@dataclass
class RunConfig:
    input: Path
    log_store: Path
    window_s: float = 120.0
    summary_window_h: float = 2.0
    max_summary_entries: int = 120
    template_version: str = "context-v1"
    utc_offset_minutes: int = 0
    seed: int = 0
    input_format: str = "jsonl"
    summary_out: Path | None = None
    gazetteer: Path | None = None
    centroid_model: Path | None = None
    beacons: Path | None = None
    backend: BackendConfig = field(default_factory=BackendConfig)
    geocode_url: str | None = None
    geocode_radius_m: float = 250.0
    geocode_timeout_s: float = 5.0
    imu: ImuConfig = field(default_factory=ImuConfig)
    backend_failure_limit: int = 3

    @classmethod
    def from_dict(cls, d: dict, base_dir: Path = Path(".")) -> "RunConfig":
        paths = d.get("paths", {})

        def path(key, required=False):
            value = paths.get(key)
            if value is None:
                if required:
                    raise ConfigError(f"paths.{key}", "required")
                return None
            p = Path(value)
            return p if p.is_absolute() else base_dir / p

        geocode = d.get("geocode", {})
        backend = dict(d.get("backend", {"kind": "mock"}))
        if backend.get("centroid_path") is not None:
            backend["centroid_path"] = str(base_dir / backend["centroid_path"])
        cfg = cls(
            input=path("input", True),
            log_store=path("log_store", True),
            summary_out=path("summary_out"),
            gazetteer=path("gazetteer"),
            centroid_model=path("centroid_model"),
            beacons=path("beacons"),
            input_format=paths.get("input_format", "jsonl"),
            window_s=float(d.get("window_s", 120.0)),
            summary_window_h=float(d.get("summary_window_h", 2.0)),
            max_summary_entries=int(d.get("max_summary_entries", 120)),
            template_version=d.get("template_version", "context-v1"),
            utc_offset_minutes=int(d.get("utc_offset_minutes", 0)),
            seed=int(d.get("seed", 0)),
            backend=BackendConfig(**backend),
            geocode_url=geocode.get("url"),
            geocode_radius_m=float(geocode.get("radius_m", 250.0)),
            geocode_timeout_s=float(geocode.get("timeout_s", 5.0)),
            imu=ImuConfig(**{k: tuple(v) if isinstance(v, list) else v for k, v in d.get("imu", {}).items()}),
            backend_failure_limit=int(d.get("backend_failure_limit", 3)),
        )
        if not cfg.window_s > 0:
            raise ConfigError("window_s", "must be > 0")
        if cfg.input_format not in ("jsonl", "csv"):
            raise ConfigError("paths.input_format", "must be jsonl or csv")
        return cfg

    @classmethod
    def load(cls, path) -> "RunConfig":
        path = Path(path)
        return cls.from_dict(load_config_file(path), path.parent)

    def missing_paths(self) -> list[Path]:
        """Referenced input files that do not exist."""
        wanted = [self.input, self.gazetteer, self.centroid_model, self.beacons]
        return [p for p in wanted if p is not None and not p.exists()]


@dataclass
class WindowFeatures:
    window: SensorWindow
    imu: ImuFeatureVector | None
    audio: AudioFeatureVector | None
    env: EnvAnnotation


def window_features(w: SensorWindow, imu_cfg: ImuConfig = ImuConfig(), mfcc_cfg: MfccConfig = MfccConfig()) -> WindowFeatures:
    try:
        imu = extract_imu_features(w, imu_cfg)
    except NoImuData:
        imu = None
    audio = None
    if w.audio is not None:
        try:
            audio = extract_audio_features(w.audio, mfcc_cfg)
        except ClipTooShort:
            audio = None
    return WindowFeatures(w, imu, audio, annotate_window(w))


class Pipeline:
    """Stateful runner holding the geocoder, backend and model for one run."""

    def __init__(self, cfg: RunConfig, model: CentroidModel | None = None):
        self.cfg = cfg
        self.warnings: list[str] = []
        self._backend_failures = 0
        self.geocoder = self._make_geocoder()
        self.beacons = load_beacon_map(cfg.beacons) if cfg.beacons else {}
        self.model = model
        if cfg.backend.kind == "mock" and self.model is None:
            if cfg.centroid_model is not None:
                self.model = CentroidModel.load(cfg.centroid_model)
            elif cfg.backend.centroid_path:
                self.model = CentroidModel.load(cfg.backend.centroid_path)
            else:
                from .synth import fit_centroid_model

                self.model = fit_centroid_model(seed=cfg.seed)

    def _make_geocoder(self) -> ReverseGeocoder | None:
        gaz = Gazetteer.load(self.cfg.gazetteer, self.cfg.geocode_radius_m) if self.cfg.gazetteer else None
        provider = None
        if self.cfg.geocode_url or os.environ.get(GEOCODE_URL_ENV):
            provider = HttpGeocodeProvider(self.cfg.geocode_url, self.cfg.geocode_timeout_s)
        if provider is None and gaz is None:
            return None
        return ReverseGeocoder(provider, gaz)

    def warn(self, msg: str) -> None:
        log.warning(msg)
        self.warnings.append(msg)

    def locate(self, w: SensorWindow) -> StructuredAddress:
        if w.geo is None or self.geocoder is None:
            return StructuredAddress(provenance="unresolved")
        try:
            addr = self.geocoder.reverse(w.geo)
        except (NoCoverage, ProviderError) as exc:
            self.warn(f"window {w.start_unix_ts}: location unresolved ({exc})")
            addr = StructuredAddress(provenance="unresolved")
        return refine_with_beacons(addr, w.geo, self.beacons)

    def infer(self, prompt) -> tuple[str, str]:
        if self._backend_failures >= self.cfg.backend_failure_limit:
            return "unknown", ""
        try:
            text = complete(prompt, self.cfg.backend, self.model)
        except BackendError as exc:
            self._backend_failures += 1
            self.warn(f"backend failed ({exc})")
            return "unknown", ""
        self._backend_failures = 0
        result = parse_context_response(text)
        return result.activity, result.scene

    def entry_for(self, feats: WindowFeatures) -> ActivityLogEntry:
        w = feats.window
        civil = to_civil_time(w.start_unix_ts, self.cfg.utc_offset_minutes)
        addr = self.locate(w)
        bundle = ContextBundle(civil, addr, feats.imu, feats.audio, feats.env, w.physio, self.cfg.window_s)
        prompt = build_context_prompt(bundle, self.cfg.template_version)
        activity, scene = self.infer(prompt)
        entry = ActivityLogEntry(
            civil_time=civil,
            address=addr,
            activity=activity,
            scene=scene,
            light=feats.env.light,
            sound=feats.env.sound,
            temperature=feats.env.temperature,
            altitude_m=feats.env.altitude_m,
            physio=w.physio,
            template_version=prompt.template_version,
            backend_model=self.cfg.backend.model_name,
            window_s=self.cfg.window_s,
        )
        flags = point_flags(entry)
        if flags:
            entry = replace(entry, flags=flags)
        return entry

    def process(self, windows, workers: int = 1) -> list[ActivityLogEntry]:
        if workers > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                feats = list(pool.map(lambda w: window_features(w, self.cfg.imu), windows))
        else:
            feats = [window_features(w, self.cfg.imu) for w in windows]
        entries = []
        for f in feats:
            if f.imu is None:
                self.warn(f"window {f.window.start_unix_ts}: no IMU data, skipped")
                continue
            entries.append(self.entry_for(f))
        return entries


def run(cfg: RunConfig, workers: int = 1, model: CentroidModel | None = None) -> tuple[list[ActivityLogEntry], Pipeline]:
    """Process the configured input stream and append entries to the log store."""
    records = parse_stream(Path(cfg.input).read_bytes(), cfg.input_format)
    windows = window_align(records, cfg.window_s)
    pipe = Pipeline(cfg, model)
    entries = pipe.process(windows, workers)
    store = LogStore(cfg.log_store)
    for e in entries:
        store.append(e)
    return entries, pipe
