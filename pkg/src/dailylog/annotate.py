"""Semantic levels for light, sound and temperature, plus barometric altitude.

Band edges are half-open and lower-inclusive: a value sitting exactly on an
edge belongs to the band above it.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass

import numpy as np

from .errors import EmptyClip, NegativeInput, NonpositivePressure, PositiveDbfs, InvalidInput

LIGHT_EDGES_LUX = (5.0, 50.0, 300.0, 1000.0)
LIGHT_LABELS = ("Extremely dark", "Dim", "Moderate brightness", "Bright", "Harsh light")

SOUND_EDGES_DBFS = (-70.0, -50.0, -30.0, -10.0)
SOUND_LABELS = ("Very Quiet", "Soft Sound", "Normal Sound", "Noisy", "Very Noisy")

TEMP_EDGES_C = (10.0, 18.0, 26.0, 30.0)
TEMP_LABELS = ("Cold", "Cool", "Comfortable", "Warm", "Hot")

DBFS_FLOOR = -120.0
ISA_SEA_LEVEL_HPA = 1013.25
ISA_EXPONENT = 1.0 / 5.255


@dataclass(frozen=True)
class IlluminationLevel:
    level: int
    label: str

    def __post_init__(self):
        if not 1 <= self.level <= 5 or LIGHT_LABELS[self.level - 1] != self.label:
            raise InvalidInput(f"invalid illumination level {self.level}/{self.label!r}")

    @classmethod
    def from_level(cls, level: int) -> "IlluminationLevel":
        return cls(level, LIGHT_LABELS[level - 1])

    def to_dict(self) -> dict:
        return {"level": self.level, "label": self.label}


def _band(value: float, edges) -> int:
    return bisect.bisect_right(edges, value)


def annotate_light(lux: float) -> IlluminationLevel:
    if lux < 0 or math.isnan(lux):
        raise NegativeInput(f"lux must be >= 0, got {lux}")
    return IlluminationLevel.from_level(_band(lux, LIGHT_EDGES_LUX) + 1)


def annotate_sound(dbfs: float) -> str:
    if dbfs > 0 or math.isnan(dbfs):
        raise PositiveDbfs(f"dBFS must be <= 0, got {dbfs}")
    return SOUND_LABELS[_band(dbfs, SOUND_EDGES_DBFS)]


def annotate_temperature(celsius: float) -> str:
    if not math.isfinite(celsius):
        raise InvalidInput(f"temperature must be finite, got {celsius}")
    return TEMP_LABELS[_band(celsius, TEMP_EDGES_C)]


def _num(v: float) -> str:
    # published tables write negatives with an en dash
    return f"{v:g}".replace("-", "–")


def range_table() -> dict[str, list[str]]:
    """Human-readable band tables rendered from the edge constants."""
    dash = "–"
    lo_hi = list(zip((0.0,) + LIGHT_EDGES_LUX, LIGHT_EDGES_LUX))
    light = [f"Level {i + 1} ({_num(a)}{dash}{_num(b)} Lux): {LIGHT_LABELS[i]}" for i, (a, b) in enumerate(lo_hi)]
    light.append(f"Level 5 (>{_num(LIGHT_EDGES_LUX[-1])} Lux): {LIGHT_LABELS[-1]}")

    e = SOUND_EDGES_DBFS
    sound = [f"<{_num(e[0])} dBFS: {SOUND_LABELS[0]}"]
    sound += [f"({_num(a)}, {_num(b)}) dBFS: {SOUND_LABELS[i + 1]}" for i, (a, b) in enumerate(zip(e, e[1:]))]
    sound.append(f">{_num(e[-1])} dBFS: {SOUND_LABELS[-1]}")

    t = TEMP_EDGES_C
    f = [c * 9 / 5 + 32 for c in t]
    temp = [f"<{_num(t[0])}°C/{_num(f[0])}°F: {TEMP_LABELS[0]}"]
    temp += [
        f"{_num(t[i])}{dash}{_num(t[i + 1])}°C/{f[i]:g}-{f[i + 1]:g}°F: {TEMP_LABELS[i + 1]}"
        for i in range(len(t) - 1)
    ]
    temp.append(f">{_num(t[-1])}°C/{_num(f[-1])}°F: {TEMP_LABELS[-1]}")
    return {"light": light, "sound": sound, "temperature": temp}


def rms_dbfs(clip) -> float:
    """RMS level of the whole clip relative to a full scale of 1.0.

    Accepts an :class:`~dailylog.ingest.AudioClip` or a bare sample array.
    Silence clamps to ``DBFS_FLOOR``.
    """
    samples = np.asarray(getattr(clip, "samples", clip), dtype=float)
    if samples.size == 0:
        raise EmptyClip("cannot measure an empty clip")
    rms = math.sqrt(float(np.mean(samples * samples)))
    if rms == 0.0:
        return DBFS_FLOOR
    return max(20.0 * math.log10(rms), DBFS_FLOOR)


def estimate_altitude(pressure_hpa: float, sea_level_hpa: float = ISA_SEA_LEVEL_HPA) -> float:
    """Altitude in meters from static pressure via the ISA barometric formula."""
    if not pressure_hpa > 0:
        raise NonpositivePressure(f"pressure must be > 0 hPa, got {pressure_hpa}")
    if pressure_hpa > 1100:
        raise InvalidInput(f"pressure {pressure_hpa} hPa above the 1100 hPa sensor range")
    if pressure_hpa == sea_level_hpa:
        return 0.0
    return 44330.0 * (1.0 - (pressure_hpa / sea_level_hpa) ** ISA_EXPONENT)


@dataclass(frozen=True)
class EnvAnnotation:
    light: IlluminationLevel | None = None
    sound: str | None = None
    temperature: str | None = None
    altitude_m: float | None = None

    def to_dict(self) -> dict:
        return {
            "light": None if self.light is None else self.light.to_dict(),
            "sound": self.sound,
            "temperature": self.temperature,
            "altitude_m": self.altitude_m,
        }


def annotate_window(window, sea_level_hpa: float = ISA_SEA_LEVEL_HPA) -> EnvAnnotation:
    """Annotate every environmental reading a window carries."""
    light = None if window.light_lux is None else annotate_light(window.light_lux)
    sound = None if window.audio is None else annotate_sound(rms_dbfs(window.audio))
    temp = None if window.ambient_temp_c is None else annotate_temperature(window.ambient_temp_c)
    alt = None
    if window.geo is not None and window.geo.pressure_hpa is not None:
        alt = estimate_altitude(min(window.geo.pressure_hpa, 1100.0), sea_level_hpa)
    return EnvAnnotation(light, sound, temp, alt)
