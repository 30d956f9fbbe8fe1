"""Stream parsing, windowing and civil-time conversion.

Wire formats
------------
JSONL: one object per line, ``{"unix_ts": number, "modality": str, "payload": ...}``.
CSV: header ``unix_ts,modality,p0,p1,...``; payload cells fill ``p0..pN`` and
trailing cells may be empty.

Payload layout by modality (JSONL form / CSV cells):

==============  ======================================  ==========================
modality        JSONL payload                           CSV p-cells
==============  ======================================  ==========================
imu_accel       ``[x, y, z]``                           x, y, z
imu_gyro        ``[x, y, z]``                           x, y, z
imu_mag         ``[x, y, z]``                           x, y, z
audio           ``{"sample_rate_hz": fs,                fs, s0, s1, ...
                "samples": [...]}`` or ``[fs, s0, ...]``
gps             ``[lat, lon]``                          lat, lon
barometer       ``[hpa]``                               hpa
light           ``[lux]``                               lux
temperature     ``[celsius]``                           celsius
wifi            ``{"ssids": [...]}`` or ``[...]``       one SSID per cell
bluetooth       ``{"macs": [...]}`` or ``[...]``        one MAC per cell
physio          ``{"hr_bpm": .., "ibi_ms": .., ...}``   hr, ibi, eda, temp, spo2
==============  ======================================  ==========================

Missing physio fields are omitted (JSONL) or left empty (CSV).
"""

from __future__ import annotations

import csv
import io
import json
import math
import re
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone
from typing import Any, Iterable, Sequence

import numpy as np

from .errors import DecodeError, EmptyStream, InvalidInput, SchemaError

IMU_MODALITIES = ("imu_accel", "imu_gyro", "imu_mag")
SCALAR_MODALITIES = ("light", "temperature", "barometer")
MODALITIES = IMU_MODALITIES + (
    "audio",
    "gps",
    "wifi",
    "bluetooth",
    "light",
    "temperature",
    "physio",
    "barometer",
)
PHYSIO_FIELDS = ("hr_bpm", "ibi_ms", "eda_microsiemens", "temp_celsius", "spo2_percent")

_MAC_RE = re.compile(r"^[0-9A-Fa-f]{2}(:[0-9A-Fa-f]{2}){5}$")


# ---------------------------------------------------------------------------
# Domain types


@dataclass(frozen=True)
class AudioChunk:
    """Raw audio payload of a single record."""

    sample_rate_hz: float
    samples: tuple[float, ...]


@dataclass(frozen=True)
class PhysioSnapshot:
    eda_microsiemens: float | None = None
    hr_bpm: float | None = None
    ibi_ms: float | None = None
    temp_celsius: float | None = None
    spo2_percent: float | None = None

    def __post_init__(self):
        values = [getattr(self, f) for f in PHYSIO_FIELDS]
        if all(v is None for v in values):
            raise InvalidInput("physio snapshot needs at least one field")
        if self.eda_microsiemens is not None and self.eda_microsiemens < 0:
            raise InvalidInput("eda_microsiemens must be >= 0")
        if self.hr_bpm is not None and self.hr_bpm <= 0:
            raise InvalidInput("hr_bpm must be > 0")
        if self.ibi_ms is not None and self.ibi_ms <= 0:
            raise InvalidInput("ibi_ms must be > 0")
        if self.spo2_percent is not None and not 0 <= self.spo2_percent <= 100:
            raise InvalidInput("spo2_percent must lie in [0, 100]")
        if self.hr_bpm is not None and self.ibi_ms is not None:
            if abs(self.ibi_ms - 60000.0 / self.hr_bpm) > 0.05 * self.ibi_ms:
                raise InvalidInput("ibi_ms inconsistent with hr_bpm (>5% apart)")

    def to_dict(self) -> dict[str, float]:
        return {f: getattr(self, f) for f in PHYSIO_FIELDS if getattr(self, f) is not None}

    @classmethod
    def from_dict(cls, d: dict) -> "PhysioSnapshot":
        unknown = set(d) - set(PHYSIO_FIELDS)
        if unknown:
            raise InvalidInput(f"unknown physio fields: {sorted(unknown)}")
        return cls(**{k: None if v is None else float(v) for k, v in d.items()})


def check_lat_lon(lat: float, lon: float) -> None:
    if not (math.isfinite(lat) and -90.0 <= lat <= 90.0):
        raise InvalidInput(f"latitude {lat} outside [-90, 90]")
    if not (math.isfinite(lon) and -180.0 <= lon <= 180.0):
        raise InvalidInput(f"longitude {lon} outside [-180, 180]")


def check_mac(mac: str) -> None:
    if not _MAC_RE.match(mac):
        raise InvalidInput(f"malformed MAC address {mac!r}")


@dataclass(frozen=True)
class GeoFix:
    lat: float
    lon: float
    pressure_hpa: float | None = None
    wifi_ssids: tuple[str, ...] = ()
    bt_macs: tuple[str, ...] = ()

    def __post_init__(self):
        check_lat_lon(self.lat, self.lon)
        if self.pressure_hpa is not None and self.pressure_hpa <= 0:
            raise InvalidInput("pressure_hpa must be > 0")
        for mac in self.bt_macs:
            check_mac(mac)


def _frozen_array(values) -> np.ndarray:
    arr = np.array(values, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class TriAxisSeries:
    sample_rate_hz: float
    x: np.ndarray
    y: np.ndarray
    z: np.ndarray

    def __post_init__(self):
        for name in ("x", "y", "z"):
            object.__setattr__(self, name, _frozen_array(getattr(self, name)))
        if not self.sample_rate_hz > 0:
            raise InvalidInput("sample_rate_hz must be > 0")
        if not len(self.x) == len(self.y) == len(self.z) >= 1:
            raise InvalidInput("x, y, z must be non-empty and equal length")

    def __len__(self) -> int:
        return len(self.x)


@dataclass(frozen=True, eq=False)
class AudioClip:
    sample_rate_hz: float
    samples: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "samples", _frozen_array(self.samples))
        if not self.sample_rate_hz > 0:
            raise InvalidInput("sample_rate_hz must be > 0")
        if self.samples.ndim != 1 or len(self.samples) < 1:
            raise InvalidInput("audio clip must be a non-empty 1-D sequence")
        if np.any(np.abs(self.samples) > 1.0):
            raise InvalidInput("audio samples must lie in [-1, 1]")

    def __len__(self) -> int:
        return len(self.samples)


@dataclass(frozen=True)
class SensorRecord:
    unix_ts: float
    modality: str
    payload: Any

    def __post_init__(self):
        if not (math.isfinite(self.unix_ts) and self.unix_ts >= 0):
            raise InvalidInput(f"unix_ts must be finite and >= 0, got {self.unix_ts}")
        if self.modality not in MODALITIES:
            raise InvalidInput(f"unknown modality {self.modality!r}")


@dataclass(frozen=True, eq=False)
class SensorWindow:
    start_unix_ts: float
    end_unix_ts: float
    imu: dict = field(default_factory=dict)  # modality -> TriAxisSeries
    audio: AudioClip | None = None
    geo: GeoFix | None = None
    light_lux: float | None = None
    ambient_temp_c: float | None = None
    physio: PhysioSnapshot | None = None
    record_count: int = 0

    @property
    def duration_s(self) -> float:
        return self.end_unix_ts - self.start_unix_ts


@dataclass(frozen=True, order=True)
class CivilTimestamp:
    year: int
    month: int
    day: int
    hour: int
    minute: int
    second: int
    utc_offset_minutes: int = 0

    def __post_init__(self):
        # datetime validates the Gregorian date and clock fields
        self.to_datetime()

    def to_datetime(self) -> datetime:
        tz = timezone(timedelta(minutes=self.utc_offset_minutes))
        return datetime(self.year, self.month, self.day, self.hour, self.minute, self.second, tzinfo=tz)

    def to_unix(self) -> int:
        delta = self.to_datetime() - _EPOCH
        return delta.days * 86400 + delta.seconds

    def __str__(self) -> str:
        off = self.utc_offset_minutes
        sign = "+" if off >= 0 else "-"
        hh, mm = divmod(abs(off), 60)
        return (
            f"{self.year:04d}-{self.month:02d}-{self.day:02d} "
            f"{self.hour:02d}:{self.minute:02d}:{self.second:02d} {sign}{hh:02d}:{mm:02d}"
        )

    @classmethod
    def parse(cls, text: str) -> "CivilTimestamp":
        m = re.fullmatch(r"(\d{4})-(\d{2})-(\d{2}) (\d{2}):(\d{2}):(\d{2}) ([+-])(\d{2}):(\d{2})", text.strip())
        if not m:
            raise InvalidInput(f"not a civil timestamp: {text!r}")
        g = m.groups()
        off = int(g[7]) * 60 + int(g[8])
        return cls(*(int(v) for v in g[:6]), utc_offset_minutes=-off if g[6] == "-" else off)


_EPOCH = datetime(1970, 1, 1, tzinfo=timezone.utc)


def to_civil_time(unix_ts: float, utc_offset_minutes: int = 0) -> CivilTimestamp:
    """Convert epoch seconds to local civil time; fractional seconds are truncated."""
    if unix_ts < 0:
        raise InvalidInput("unix_ts must be >= 0")
    tz = timezone(timedelta(minutes=utc_offset_minutes))
    dt = (_EPOCH + timedelta(seconds=math.floor(unix_ts))).astimezone(tz)
    return CivilTimestamp(dt.year, dt.month, dt.day, dt.hour, dt.minute, dt.second, utc_offset_minutes)


# ---------------------------------------------------------------------------
# Parsing


def _num(v, what: str) -> float:
    if isinstance(v, bool) or v is None or v == "":
        raise InvalidInput(f"{what}: expected a number, got {v!r}")
    try:
        out = float(v)
    except (TypeError, ValueError):
        raise InvalidInput(f"{what}: expected a number, got {v!r}") from None
    if not math.isfinite(out):
        raise InvalidInput(f"{what}: non-finite value")
    return out


def _make_payload(modality: str, raw):
    if modality in IMU_MODALITIES:
        if not isinstance(raw, (list, tuple)) or len(raw) != 3:
            raise InvalidInput(f"{modality} payload needs exactly 3 numbers")
        return tuple(_num(v, modality) for v in raw)
    if modality in SCALAR_MODALITIES:
        if not isinstance(raw, (list, tuple)) or len(raw) != 1:
            raise InvalidInput(f"{modality} payload needs exactly 1 number")
        value = _num(raw[0], modality)
        if modality == "light" and value < 0:
            raise InvalidInput("light lux must be >= 0")
        if modality == "barometer" and value <= 0:
            raise InvalidInput("barometer pressure must be > 0")
        return (value,)
    if modality == "gps":
        if not isinstance(raw, (list, tuple)) or len(raw) != 2:
            raise InvalidInput("gps payload needs [lat, lon]")
        lat, lon = _num(raw[0], "lat"), _num(raw[1], "lon")
        check_lat_lon(lat, lon)
        return (lat, lon)
    if modality == "audio":
        if isinstance(raw, dict):
            fs, samples = raw.get("sample_rate_hz"), raw.get("samples")
            if samples is None:
                raise InvalidInput("audio payload missing 'samples'")
        elif isinstance(raw, (list, tuple)) and len(raw) >= 2:
            fs, samples = raw[0], raw[1:]
        else:
            raise InvalidInput("audio payload needs a sample rate and at least one sample")
        fs = _num(fs, "sample_rate_hz")
        if fs <= 0:
            raise InvalidInput("audio sample_rate_hz must be > 0")
        values = tuple(_num(s, "audio sample") for s in samples)
        if not values:
            raise InvalidInput("audio payload has no samples")
        if any(abs(s) > 1.0 for s in values):
            raise InvalidInput("audio samples must lie in [-1, 1]")
        return AudioChunk(fs, values)
    if modality in ("wifi", "bluetooth"):
        key = "ssids" if modality == "wifi" else "macs"
        items = raw.get(key) if isinstance(raw, dict) else raw
        if not isinstance(items, (list, tuple)) or not all(isinstance(s, str) for s in items):
            raise InvalidInput(f"{modality} payload needs a list of strings")
        if modality == "bluetooth":
            for mac in items:
                check_mac(mac)
        return tuple(items)
    if modality == "physio":
        if isinstance(raw, dict):
            return PhysioSnapshot.from_dict(raw)
        if isinstance(raw, (list, tuple)) and len(raw) <= len(PHYSIO_FIELDS):
            d = {f: _num(v, f) for f, v in zip(PHYSIO_FIELDS, raw) if v not in (None, "")}
            return PhysioSnapshot.from_dict(d)
        raise InvalidInput("physio payload must be an object or up to 5 values")
    raise InvalidInput(f"unknown modality {modality!r}")


def make_record(unix_ts, modality, payload) -> SensorRecord:
    """Validate a raw (ts, modality, payload) triple into a :class:`SensorRecord`."""
    ts = _num(unix_ts, "unix_ts")
    if modality not in MODALITIES:
        raise InvalidInput(f"unknown modality {modality!r}")
    return SensorRecord(ts, modality, _make_payload(modality, payload))


def parse_stream(raw: bytes, format: str = "jsonl") -> list[SensorRecord]:
    """Parse a raw byte stream into records, preserving input order.

    Every malformed line raises :class:`SchemaError` carrying its 1-based line
    number; nothing is dropped silently.
    """
    try:
        text = raw.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise DecodeError(f"stream is not valid UTF-8: {exc}") from exc
    if format == "jsonl":
        return list(_parse_jsonl(text))
    if format == "csv":
        return list(_parse_csv(text))
    raise InvalidInput(f"unknown stream format {format!r}")


def _parse_jsonl(text: str):
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"invalid JSON ({exc.msg})", lineno) from None
        if not isinstance(obj, dict):
            raise SchemaError("expected a JSON object", lineno)
        for key in ("unix_ts", "modality", "payload"):
            if key not in obj:
                raise SchemaError(f"missing field {key!r}", lineno)
        try:
            yield make_record(obj["unix_ts"], obj["modality"], obj["payload"])
        except InvalidInput as exc:
            raise SchemaError(str(exc), lineno) from None


def _parse_csv(text: str):
    rows = csv.reader(io.StringIO(text))
    header = next(rows, None)
    if header is None:
        return
    if header[:2] != ["unix_ts", "modality"]:
        raise SchemaError("CSV header must start with unix_ts,modality", 1)
    for lineno, row in enumerate(rows, start=2):
        if not row or not any(cell.strip() for cell in row):
            continue
        if len(row) < 2 or not row[0] or not row[1]:
            raise SchemaError("missing unix_ts or modality", lineno)
        modality = row[1]
        cells = row[2:]
        if modality == "physio":
            cells = cells[: len(PHYSIO_FIELDS)]
            if any(c.strip() for c in row[2 + len(PHYSIO_FIELDS):]):
                raise SchemaError("physio row has more than 5 payload cells", lineno)
        else:
            while cells and cells[-1] == "":
                cells.pop()
        try:
            yield make_record(row[0], modality, cells)
        except InvalidInput as exc:
            raise SchemaError(str(exc), lineno) from None


# ---------------------------------------------------------------------------
# Serialization (inverse of parse_stream)


def _ts_out(ts: float):
    return int(ts) if float(ts).is_integer() else ts


def _payload_out(rec: SensorRecord):
    p = rec.payload
    if rec.modality == "audio":
        return {"sample_rate_hz": p.sample_rate_hz, "samples": list(p.samples)}
    if rec.modality == "wifi":
        return {"ssids": list(p)}
    if rec.modality == "bluetooth":
        return {"macs": list(p)}
    if rec.modality == "physio":
        return p.to_dict()
    return list(p)


def _csv_cells(rec: SensorRecord) -> list:
    p = rec.payload
    if rec.modality == "audio":
        return [p.sample_rate_hz, *p.samples]
    if rec.modality == "physio":
        return ["" if getattr(p, f) is None else getattr(p, f) for f in PHYSIO_FIELDS]
    return list(p)


def serialize_stream(records: Iterable[SensorRecord], format: str = "jsonl") -> bytes:
    records = list(records)
    if format == "jsonl":
        lines = [
            json.dumps({"unix_ts": _ts_out(r.unix_ts), "modality": r.modality, "payload": _payload_out(r)})
            for r in records
        ]
        return ("\n".join(lines) + ("\n" if lines else "")).encode("utf-8")
    if format == "csv":
        rows = [[_ts_out(r.unix_ts), r.modality, *_csv_cells(r)] for r in records]
        width = max((len(row) for row in rows), default=2)
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["unix_ts", "modality", *(f"p{i}" for i in range(width - 2))])
        for row in rows:
            writer.writerow([repr(c) if isinstance(c, float) else c for c in row] + [""] * (width - len(row)))
        return buf.getvalue().encode("utf-8")
    raise InvalidInput(f"unknown stream format {format!r}")


# ---------------------------------------------------------------------------
# Windowing


def _estimate_rate(ts: np.ndarray, default: float) -> float:
    if len(ts) < 2:
        return default
    diffs = np.diff(ts)
    diffs = diffs[diffs > 0]
    if len(diffs) == 0:
        return default
    return float(1.0 / np.median(diffs))


def window_align(
    records: Sequence[SensorRecord],
    window_s: float,
    imu_rate_hz: float | None = None,
    default_imu_rate_hz: float = 50.0,
) -> list[SensorWindow]:
    """Group records into half-open windows ``[start, start + window_s)``.

    Windows are anchored at the earliest timestamp and tile the stream,
    so empty windows in gaps are kept. ``imu_rate_hz`` fixes the IMU rate;
    otherwise it is estimated per window from sample spacing.
    """
    if not window_s > 0:
        raise InvalidInput("window_s must be > 0")
    if not records:
        raise EmptyStream("no records to window")

    ordered = sorted(records, key=lambda r: r.unix_ts)  # stable
    last_of = {(r.unix_ts, r.modality): i for i, r in enumerate(ordered)}
    ordered = [r for i, r in enumerate(ordered) if last_of[(r.unix_ts, r.modality)] == i]

    t0 = ordered[0].unix_ts
    n_windows = int(math.floor((ordered[-1].unix_ts - t0) / window_s)) + 1
    buckets: list[list[SensorRecord]] = [[] for _ in range(n_windows)]
    for r in ordered:
        buckets[int(math.floor((r.unix_ts - t0) / window_s))].append(r)

    windows = []
    last_fix: tuple[float, float] | None = None
    for k, bucket in enumerate(buckets):
        start = t0 + k * window_s
        window, last_fix = _build_window(bucket, start, start + window_s, last_fix, imu_rate_hz, default_imu_rate_hz)
        windows.append(window)
    return windows


def _build_window(bucket, start, end, last_fix, imu_rate_hz, default_rate):
    by_mod: dict[str, list[SensorRecord]] = {}
    for r in bucket:
        by_mod.setdefault(r.modality, []).append(r)

    imu = {}
    for mod in IMU_MODALITIES:
        recs = by_mod.get(mod)
        if not recs:
            continue
        ts = np.array([r.unix_ts for r in recs])
        xyz = np.array([r.payload for r in recs])
        fs = imu_rate_hz or _estimate_rate(ts, default_rate)
        imu[mod] = TriAxisSeries(fs, xyz[:, 0], xyz[:, 1], xyz[:, 2])

    audio = None
    if "audio" in by_mod:
        chunks = [r.payload for r in by_mod["audio"]]
        rates = {c.sample_rate_hz for c in chunks}
        if len(rates) != 1:
            raise InvalidInput(f"audio chunks in window at {start} disagree on sample rate: {sorted(rates)}")
        audio = AudioClip(rates.pop(), np.concatenate([np.asarray(c.samples) for c in chunks]))

    def mean_of(mod):
        recs = by_mod.get(mod)
        return None if not recs else float(np.mean([r.payload[0] for r in recs]))

    fix = by_mod["gps"][-1].payload if "gps" in by_mod else last_fix
    geo = None
    if fix is not None:
        ssids = sorted({s for r in by_mod.get("wifi", []) for s in r.payload})
        macs = sorted({m for r in by_mod.get("bluetooth", []) for m in r.payload})
        geo = GeoFix(fix[0], fix[1], mean_of("barometer"), tuple(ssids), tuple(macs))

    physio_recs = by_mod.get("physio", [])
    superseded = max(len(physio_recs) - 1, 0)
    window = SensorWindow(
        start_unix_ts=start,
        end_unix_ts=end,
        imu=imu,
        audio=audio,
        geo=geo,
        light_lux=mean_of("light"),
        ambient_temp_c=mean_of("temperature"),
        physio=physio_recs[-1].payload if physio_recs else None,
        record_count=len(bucket) - superseded,
    )
    return window, fix
