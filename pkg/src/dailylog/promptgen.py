"""Deterministic prompt rendering from versioned templates.

Template file format (``templates/<version>.txt``)::

    # free comment
    #! version: context-v1
    #! kind: context            (context | summary | ablation)
    @@ Section Name
    body text with {{slot}} placeholders

Rendered prompts join section bodies with a blank line. Numbers are printed
with 4 decimals.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources

import numpy as np

from .annotate import EnvAnnotation
from .audio_features import AudioFeatureVector, feature_names as audio_feature_names
from .errors import EmptyEntries, FeatureParseError, MissingImu, NotTimeOrdered, TemplateError
from .imu_features import BLOCK_NAMES, SENSOR_PREFIX, ImuFeatureVector
from .ingest import IMU_MODALITIES, CivilTimestamp, PhysioSnapshot
from .vocab import ACTIVITIES

CONTEXT_SECTIONS = (
    "Data Introduction",
    "Feature Explanation",
    "Task Explanation",
    "Specific Feature Vectors",
    "Output Format",
)
SEPARATOR = "\n\n"
DEFAULT_CONTEXT_TEMPLATE = "context-v1"
DEFAULT_SUMMARY_TEMPLATE = "summary-v1"

_SLOT = re.compile(r"\{\{\s*([a-z_]+)\s*\}\}")


@dataclass(frozen=True)
class Template:
    version: str
    kind: str
    sections: tuple[tuple[str, str], ...]

    def render(self, values: dict[str, str]) -> "Prompt":
        out = []
        for name, body in self.sections:
            def sub(m, _name=name):
                key = m.group(1)
                if key not in values:
                    raise TemplateError(f"{self.version}/{_name}: no value for slot {{{{{key}}}}}")
                return values[key]

            out.append((name, _SLOT.sub(sub, body)))
        return Prompt(tuple(out), self.version)


def parse_template(text: str) -> Template:
    meta: dict[str, str] = {}
    sections: list[tuple[str, list[str]]] = []
    for line in text.splitlines():
        if line.startswith("@@ "):
            sections.append((line[3:].strip(), []))
        elif sections:
            sections[-1][1].append(line)
        elif line.startswith("#!"):
            key, _, value = line[2:].partition(":")
            meta[key.strip()] = value.strip()
        elif line.strip() and not line.startswith("#"):
            raise TemplateError(f"text outside a section: {line!r}")
    if "version" not in meta or "kind" not in meta:
        raise TemplateError("template needs '#! version:' and '#! kind:' lines")
    built = tuple((name, "\n".join(body).strip("\n")) for name, body in sections)
    if meta["kind"] == "context" and tuple(n for n, _ in built) != CONTEXT_SECTIONS:
        raise TemplateError(f"context template must have sections {CONTEXT_SECTIONS}")
    return Template(meta["version"], meta["kind"], built)


@lru_cache(maxsize=None)
def load_template(version: str) -> Template:
    try:
        text = resources.files("dailylog").joinpath("templates", f"{version}.txt").read_text(encoding="utf-8")
    except FileNotFoundError:
        raise TemplateError(f"no template named {version!r}") from None
    tpl = parse_template(text)
    if tpl.version != version:
        raise TemplateError(f"template file {version}.txt declares version {tpl.version!r}")
    return tpl


@dataclass(frozen=True)
class Prompt:
    sections: tuple[tuple[str, str], ...]
    template_version: str = ""

    @property
    def rendered(self) -> str:
        return SEPARATOR.join(text for _, text in self.sections)

    @property
    def section_names(self) -> list[str]:
        return [n for n, _ in self.sections]

    def section(self, name: str) -> str:
        for n, text in self.sections:
            if n == name:
                return text
        raise KeyError(name)


@dataclass(frozen=True)
class ContextBundle:
    civil_time: CivilTimestamp
    address: object  # StructuredAddress
    imu: ImuFeatureVector | None
    audio: AudioFeatureVector | None = None
    env: EnvAnnotation = field(default_factory=EnvAnnotation)
    physio: PhysioSnapshot | None = None
    window_s: float = 120.0


def fmt(v: float) -> str:
    return f"{float(v):.4f}"


def _pairs(names, values) -> str:
    return ", ".join(f"{n}={fmt(v)}" for n, v in zip(names, values))


def format_feature_vectors(imu: ImuFeatureVector, audio: AudioFeatureVector | None) -> str:
    lines = []
    present = imu.sensors
    for mod in IMU_MODALITIES:
        key = f"imu.{SENSOR_PREFIX[mod]}"
        lines.append(f"{key}: {_pairs(BLOCK_NAMES, imu.block(mod))}" if mod in present else f"{key}: absent")
    lines.append("audio: absent" if audio is None else f"audio: {_pairs(audio_feature_names(), audio.values)}")
    return "\n".join(lines)


def parse_feature_vectors(text: str) -> dict[str, dict[str, float] | None]:
    """Inverse of :func:`format_feature_vectors`; accepts a whole prompt too."""
    out: dict[str, dict[str, float] | None] = {}
    for line in text.splitlines():
        m = re.match(r"^(imu\.(?:accel|gyro|mag)|audio):\s*(.*)$", line.strip())
        if not m:
            continue
        key, rest = m.groups()
        if rest.strip() == "absent":
            out[key] = None
            continue
        values = {}
        for pair in rest.split(","):
            name, eq, num = pair.strip().partition("=")
            if not eq:
                raise FeatureParseError(f"{key}: malformed pair {pair.strip()!r}")
            try:
                values[name] = float(num)
            except ValueError:
                raise FeatureParseError(f"{key}: {name} is not a number ({num!r})") from None
        out[key] = values
    if not out:
        raise FeatureParseError("no feature vector lines found")
    return out


def _describe_env(env: EnvAnnotation) -> str:
    parts = []
    if env.light is not None:
        parts.append(f"light level {env.light.level} ({env.light.label})")
    if env.sound is not None:
        parts.append(f"sound {env.sound}")
    if env.temperature is not None:
        parts.append(f"temperature {env.temperature}")
    if env.altitude_m is not None:
        parts.append(f"altitude {fmt(env.altitude_m)} m")
    return "; ".join(parts) or "not available"


def _describe_physio(p: PhysioSnapshot | None) -> str:
    if p is None:
        return "not available"
    return "; ".join(f"{k}={fmt(v)}" for k, v in p.to_dict().items())


def build_context_prompt(b: ContextBundle, template_version: str = DEFAULT_CONTEXT_TEMPLATE) -> Prompt:
    if b.imu is None:
        raise MissingImu("context prompts need IMU features")
    tpl = load_template(template_version)
    if tpl.kind not in ("context", "ablation"):
        raise TemplateError(f"{template_version} is not a context template")
    label = b.address.label() if hasattr(b.address, "label") else str(b.address)
    return tpl.render({
        "window_s": f"{b.window_s:g}",
        "date_time": str(b.civil_time),
        "location": label,
        "environment": _describe_env(b.env),
        "physio": _describe_physio(b.physio),
        "activity_vocabulary": ", ".join(a for a in ACTIVITIES if a != "unknown"),
        "feature_vectors": format_feature_vectors(b.imu, b.audio),
        "template_version": tpl.version,
    })


def build_summary_prompt(entries, window_h: float, template_version: str = DEFAULT_SUMMARY_TEMPLATE) -> Prompt:
    """Summary prompt over time-ordered log entries (anything with ``unix_ts()`` and ``to_json()``)."""
    entries = list(entries)
    if not entries:
        raise EmptyEntries("nothing to summarize")
    for i in range(1, len(entries)):
        if entries[i].unix_ts() <= entries[i - 1].unix_ts():
            raise NotTimeOrdered(i)
    tpl = load_template(template_version)
    if tpl.kind != "summary":
        raise TemplateError(f"{template_version} is not a summary template")
    return tpl.render({
        "window_h": f"{window_h:g}",
        "entry_count": str(len(entries)),
        "entries": "\n".join(e.to_json() for e in entries),
        "template_version": tpl.version,
    })


def recover_imu_block(prompt_text: str, sensor: str = "accel") -> np.ndarray:
    """Pull one sensor's 26 features back out of a rendered prompt."""
    vectors = parse_feature_vectors(prompt_text)
    block = vectors.get(f"imu.{sensor}")
    if block is None:
        raise FeatureParseError(f"prompt carries no imu.{sensor} features")
    missing = [n for n in BLOCK_NAMES if n not in block]
    if missing:
        raise FeatureParseError(f"imu.{sensor} lacks {missing}")
    return np.array([block[n] for n in BLOCK_NAMES])
