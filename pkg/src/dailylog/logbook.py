"""Activity log entries, the JSONL store, anomaly rules and summaries.

Store format: UTF-8 JSONL, one entry per line, keys in this order::

    civil_time        "YYYY-MM-DD HH:MM:SS +HH:MM"
    window_s          window length in seconds
    address           {street, district, city, country, place_type, provenance}
    activity          label from the activity vocabulary
    scene             free text
    light             {"level": 1..5, "label": str} or null
    sound             sound label or null
    temperature       temperature label or null
    altitude_m        number or null
    physio            {hr_bpm, ibi_ms, eda_microsiemens, temp_celsius, spo2_percent} subset or null
    template_version  prompt template used
    backend_model     model name that produced the activity
    flags             list of point-anomaly codes raised at this entry
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field
from pathlib import Path

from .annotate import IlluminationLevel, SOUND_LABELS, TEMP_LABELS
from .errors import BackendError, EmptyWindow, InvalidInput, OutOfOrder
from .geoloc import StructuredAddress
from .ingest import CivilTimestamp, PhysioSnapshot
from .promptgen import build_summary_prompt
from .vocab import ACTIVITIES


@dataclass(frozen=True)
class ActivityLogEntry:
    civil_time: CivilTimestamp
    address: StructuredAddress
    activity: str
    scene: str = ""
    light: IlluminationLevel | None = None
    sound: str | None = None
    temperature: str | None = None
    altitude_m: float | None = None
    physio: PhysioSnapshot | None = None
    template_version: str = ""
    backend_model: str = ""
    window_s: float = 120.0
    flags: tuple[str, ...] = ()

    def __post_init__(self):
        if self.activity not in ACTIVITIES:
            raise InvalidInput(f"unknown activity {self.activity!r}")
        if self.sound is not None and self.sound not in SOUND_LABELS:
            raise InvalidInput(f"unknown sound label {self.sound!r}")
        if self.temperature is not None and self.temperature not in TEMP_LABELS:
            raise InvalidInput(f"unknown temperature label {self.temperature!r}")
        if not self.window_s > 0:
            raise InvalidInput("window_s must be > 0")

    def unix_ts(self) -> int:
        return self.civil_time.to_unix()

    def to_dict(self) -> dict:
        return {
            "civil_time": str(self.civil_time),
            "window_s": self.window_s,
            "address": self.address.to_dict(),
            "activity": self.activity,
            "scene": self.scene,
            "light": None if self.light is None else self.light.to_dict(),
            "sound": self.sound,
            "temperature": self.temperature,
            "altitude_m": self.altitude_m,
            "physio": None if self.physio is None else self.physio.to_dict(),
            "template_version": self.template_version,
            "backend_model": self.backend_model,
            "flags": list(self.flags),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), ensure_ascii=False)

    @classmethod
    def from_dict(cls, d: dict) -> "ActivityLogEntry":
        light = d.get("light")
        physio = d.get("physio")
        return cls(
            civil_time=CivilTimestamp.parse(d["civil_time"]),
            address=StructuredAddress.from_dict(d["address"]),
            activity=d["activity"],
            scene=d.get("scene", ""),
            light=None if light is None else IlluminationLevel(int(light["level"]), light["label"]),
            sound=d.get("sound"),
            temperature=d.get("temperature"),
            altitude_m=d.get("altitude_m"),
            physio=None if physio is None else PhysioSnapshot.from_dict(physio),
            template_version=d.get("template_version", ""),
            backend_model=d.get("backend_model", ""),
            window_s=d.get("window_s", 120.0),
            flags=tuple(d.get("flags", ())),
        )

    @classmethod
    def from_json(cls, line: str) -> "ActivityLogEntry":
        return cls.from_dict(json.loads(line))


class LogStore:
    """Append-only JSONL store; single writer, any number of readers."""

    def __init__(self, path):
        self.path = Path(path)
        self._last_ts: int | None = None
        if self.path.exists():
            entries = self.read()
            if entries:
                self._last_ts = entries[-1].unix_ts()

    def append(self, e: ActivityLogEntry) -> None:
        ts = e.unix_ts()
        if self._last_ts is not None and ts <= self._last_ts:
            raise OutOfOrder(f"entry at {e.civil_time} is not after the last stored entry")
        self.path.parent.mkdir(parents=True, exist_ok=True)
        with self.path.open("a", encoding="utf-8") as fh:
            fh.write(e.to_json() + "\n")
            fh.flush()
            os.fsync(fh.fileno())
        self._last_ts = ts

    def read(self) -> list[ActivityLogEntry]:
        if not self.path.exists():
            return []
        with self.path.open(encoding="utf-8") as fh:
            return [ActivityLogEntry.from_json(line) for line in fh if line.strip()]

    def __len__(self) -> int:
        return len(self.read())


def append_entry(store: LogStore, e: ActivityLogEntry) -> None:
    store.append(e)


# ---------------------------------------------------------------------------
# Anomalies


@dataclass(frozen=True)
class AnomalyThresholds:
    sedentary_h: float = 2.5
    environment_h: float = 1.0
    hr_bpm: float = 100.0
    spo2_percent: float = 92.0
    body_temp_c: float = 37.5
    max_gap_factor: float = 1.5  # a gap longer than this many windows breaks a run


@dataclass(frozen=True)
class Anomaly:
    family: str
    code: str
    span: tuple[int, int]
    detail: str

    def to_dict(self) -> dict:
        return {"family": self.family, "code": self.code, "span": list(self.span), "detail": self.detail}


RESTING = {"sitting", "lying"}


def point_flags(e: ActivityLogEntry, th: AnomalyThresholds = AnomalyThresholds()) -> tuple[str, ...]:
    """Health rules that fire on a single entry."""
    flags = []
    p = e.physio
    if p is not None:
        if p.hr_bpm is not None and p.hr_bpm > th.hr_bpm and e.activity in RESTING:
            flags.append("hr_high")
        if p.spo2_percent is not None and p.spo2_percent < th.spo2_percent:
            flags.append("spo2_low")
        if p.temp_celsius is not None and p.temp_celsius > th.body_temp_c:
            flags.append("fever")
    return tuple(flags)


def _runs(entries, predicate, th: AnomalyThresholds):
    """Maximal contiguous runs of entries satisfying ``predicate``."""
    run = []
    for e in entries:
        contiguous = run and e.unix_ts() - run[-1].unix_ts() <= th.max_gap_factor * run[-1].window_s
        if predicate(e) and (not run or contiguous):
            run.append(e)
            continue
        if run:
            yield run
        run = [e] if predicate(e) else []
    if run:
        yield run


def _span(run) -> tuple[int, int]:
    return run[0].unix_ts(), int(run[-1].unix_ts() + run[-1].window_s)


_ENV_RULES = (
    ("dark", lambda e: e.light is not None and e.light.level == 1, "extreme darkness"),
    ("heat", lambda e: e.temperature == "Hot", "heat"),
    ("noise", lambda e: e.sound == "Very Noisy", "very loud noise"),
)


def detect_anomalies(entries, th: AnomalyThresholds = AnomalyThresholds()) -> list[Anomaly]:
    entries = list(entries)
    found = []
    for run in _runs(entries, lambda e: e.activity in RESTING, th):
        start, end = _span(run)
        if end - start > th.sedentary_h * 3600:
            found.append(Anomaly("behavioral", "sedentary", (start, end),
                                 f"inactive (sitting/lying) for {(end - start) / 3600:.1f} h"))
    for code, pred, what in _ENV_RULES:
        for run in _runs(entries, pred, th):
            start, end = _span(run)
            if end - start > th.environment_h * 3600:
                found.append(Anomaly("environmental", code, (start, end), f"{what} for {(end - start) / 3600:.1f} h"))
    for code in ("hr_high", "spo2_low", "fever"):
        for run in _runs(entries, lambda e, c=code: c in point_flags(e, th), th):
            found.append(Anomaly("health", code, _span(run), f"{code} at {len(run)} entries from {run[0].civil_time}"))
    return sorted(found, key=lambda a: (a.span, a.family, a.code))


# ---------------------------------------------------------------------------
# Selection and summaries


def _trailing(entries, window_h: float, until: int | None = None):
    if not entries:
        return []
    end = until if until is not None else entries[-1].unix_ts()
    start = end - window_h * 3600
    return [e for e in entries if start <= e.unix_ts() <= end]


def downsample(entries, max_entries: int, keep=()) -> list:
    """Stride-thin ``entries`` keeping both endpoints and every index in ``keep``."""
    if max_entries < 2:
        raise InvalidInput("max_entries must be >= 2")
    n = len(entries)
    if n <= max_entries:
        return list(entries)
    stride = math.ceil(n / max_entries)
    chosen = {i for i in range(0, n, stride)} | {0, n - 1} | set(keep)
    return [entries[i] for i in sorted(chosen)]


def select_for_summary(store, window_h: float, max_entries: int = 120, until: int | None = None,
                       th: AnomalyThresholds = AnomalyThresholds()) -> list[ActivityLogEntry]:
    if not window_h > 0:
        raise InvalidInput("window_h must be > 0")
    entries = store.read() if isinstance(store, LogStore) else list(store)
    window = _trailing(entries, window_h, until)
    if not window:
        raise EmptyWindow(f"no entries in the trailing {window_h:g} h")
    boundaries = {t for a in detect_anomalies(window, th) for t in a.span}
    keep = [i for i, e in enumerate(window) if e.flags or point_flags(e, th) or e.unix_ts() in boundaries]
    return downsample(window, max_entries, keep)


@dataclass
class SummaryReport:
    window: tuple[CivilTimestamp, CivilTimestamp]
    narrative: str
    activity_distribution: dict[str, float]
    trajectory: list[str]
    anomalies: list[Anomaly] = field(default_factory=list)
    entry_count: int = 0
    selected_count: int = 0
    backend_error: str | None = None

    def to_dict(self) -> dict:
        return {
            "window": [str(self.window[0]), str(self.window[1])],
            "narrative": self.narrative,
            "activity_distribution": self.activity_distribution,
            "trajectory": self.trajectory,
            "anomalies": [a.to_dict() for a in self.anomalies],
            "entry_count": self.entry_count,
            "selected_count": self.selected_count,
            "backend_error": self.backend_error,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), ensure_ascii=False, indent=2)

    def render_text(self) -> str:
        lines = [f"Summary {self.window[0]} .. {self.window[1]} ({self.entry_count} entries)", ""]
        lines.append("Activity distribution:")
        for act, frac in sorted(self.activity_distribution.items(), key=lambda kv: -kv[1]):
            lines.append(f"  {act:<18} {100 * frac:5.1f}%")
        lines.append("Trajectory: " + (" -> ".join(self.trajectory) or "none"))
        lines.append("Anomalies:" if self.anomalies else "Anomalies: none")
        for a in self.anomalies:
            lines.append(f"  [{a.family}] {a.code}: {a.detail}")
        lines += ["", self.narrative or f"(no narrative: {self.backend_error or 'backend unavailable'})"]
        return "\n".join(lines)


def activity_distribution(entries) -> dict[str, float]:
    known = [e.activity for e in entries if e.activity != "unknown"]
    if not known:
        return {}
    counts: dict[str, int] = {}
    for a in known:
        counts[a] = counts.get(a, 0) + 1
    return {a: c / len(known) for a, c in sorted(counts.items())}


def trajectory(entries) -> list[str]:
    seen, out = set(), []
    for e in entries:
        place = e.address.label()
        if place not in seen:
            seen.add(place)
            out.append(place)
    return out


def summarize(store, window_h: float, backend, max_entries: int = 120, until: int | None = None,
              th: AnomalyThresholds = AnomalyThresholds(), model=None) -> SummaryReport:
    """Deterministic report fields plus a backend narrative.

    ``backend`` is a :class:`~dailylog.inference.BackendConfig` or any callable
    mapping a prompt to text. Backend failures leave the narrative empty and
    record the error in ``backend_error``.
    """
    entries = store.read() if isinstance(store, LogStore) else list(store)
    window = _trailing(entries, window_h, until)
    if not window:
        raise EmptyWindow(f"no entries in the trailing {window_h:g} h")
    selected = select_for_summary(window, window_h, max_entries, until, th)
    report = SummaryReport(
        window=(window[0].civil_time, window[-1].civil_time),
        narrative="",
        activity_distribution=activity_distribution(window),
        trajectory=trajectory(window),
        anomalies=detect_anomalies(window, th),
        entry_count=len(window),
        selected_count=len(selected),
    )
    prompt = build_summary_prompt(selected, window_h)
    try:
        if callable(backend):
            report.narrative = backend(prompt)
        else:
            from .inference import complete

            report.narrative = complete(prompt, backend, model) if backend.kind == "http_chat" else _mock_summary(report)
    except BackendError as exc:
        report.backend_error = str(exc)
    return report


def _mock_summary(report: SummaryReport) -> str:
    """Template narrative used by the offline mock backend."""
    if report.activity_distribution:
        main = max(report.activity_distribution.items(), key=lambda kv: kv[1])
        parts = [f"Over this period you were mostly {main[0]} ({100 * main[1]:.0f}% of the time)."]
    else:
        parts = ["No activity could be recognised in this period."]
    if report.trajectory:
        parts.append("You were at " + ", then ".join(report.trajectory) + ".")
    for a in report.anomalies:
        parts.append(f"Reminder: {a.detail}.")
    return " ".join(parts)
