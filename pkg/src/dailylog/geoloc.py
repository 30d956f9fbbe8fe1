"""Reverse geocoding with an offline gazetteer fallback and beacon refinement.

HTTP provider protocol: ``GET {url}?lat=<lat>&lon=<lon>`` answered with a JSON
object carrying any of ``street``, ``district``, ``city``, ``country`` and
``place_type`` as strings. Any non-200 status or malformed body is a
:class:`ProviderError`.

Gazetteer CSV: header ``lat,lon,street,district,city,country,place_type``.
"""

from __future__ import annotations

import csv
import json
import math
import os
import threading
from collections import OrderedDict
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Protocol

import requests

from .errors import InvalidInput, NoCoverage, ProviderError
from .ingest import GeoFix, check_lat_lon

EARTH_RADIUS_M = 6371.0e3
ADDRESS_FIELDS = ("street", "district", "city", "country")
GEOCODE_URL_ENV = "DAILYLOG_GEOCODE_URL"


@dataclass(frozen=True)
class StructuredAddress:
    street: str = ""
    district: str = ""
    city: str = ""
    country: str = ""
    place_type: str = ""
    provenance: str = "online"

    def label(self) -> str:
        parts = [getattr(self, f) for f in ADDRESS_FIELDS if getattr(self, f)]
        text = ", ".join(parts) or "unknown location"
        return f"{text} ({self.place_type})" if self.place_type else text

    def to_dict(self) -> dict:
        return {f: getattr(self, f) for f in (*ADDRESS_FIELDS, "place_type", "provenance")}

    @classmethod
    def from_dict(cls, d: dict) -> "StructuredAddress":
        return cls(**{k: str(d.get(k) or "") for k in (*ADDRESS_FIELDS, "place_type")},
                   provenance=str(d.get("provenance") or "online"))


def haversine_m(lat1: float, lon1: float, lat2: float, lon2: float) -> float:
    p1, p2 = math.radians(lat1), math.radians(lat2)
    dp, dl = p2 - p1, math.radians(lon2 - lon1)
    a = math.sin(dp / 2) ** 2 + math.cos(p1) * math.cos(p2) * math.sin(dl / 2) ** 2
    return 2 * EARTH_RADIUS_M * math.asin(min(1.0, math.sqrt(a)))


class GeocodeProvider(Protocol):
    def reverse(self, lat: float, lon: float) -> StructuredAddress: ...


class HttpGeocodeProvider:
    """Query a JSON reverse-geocoding endpoint.

    ``url`` falls back to the ``DAILYLOG_GEOCODE_URL`` environment variable.
    ``request_count`` counts outgoing requests.
    """

    def __init__(self, url: str | None = None, timeout_s: float = 5.0, session: requests.Session | None = None):
        self.url = os.environ.get(GEOCODE_URL_ENV) or url
        if not self.url:
            raise InvalidInput("geocode url not configured")
        self.timeout_s = timeout_s
        self.session = session or requests.Session()
        self.request_count = 0

    def reverse(self, lat: float, lon: float) -> StructuredAddress:
        self.request_count += 1
        try:
            resp = self.session.get(self.url, params={"lat": lat, "lon": lon}, timeout=self.timeout_s)
        except requests.RequestException as exc:
            raise ProviderError(f"geocode request failed: {exc}") from exc
        if resp.status_code != 200:
            raise ProviderError(f"geocode endpoint returned HTTP {resp.status_code}")
        try:
            body = resp.json()
        except ValueError:
            raise ProviderError("geocode endpoint returned non-JSON body") from None
        if not isinstance(body, dict):
            raise ProviderError("geocode response must be a JSON object")
        addr = StructuredAddress.from_dict(body)
        if not any(getattr(addr, f) for f in ADDRESS_FIELDS):
            raise NoCoverage(f"provider has no address for ({lat}, {lon})")
        return addr


@dataclass(frozen=True)
class GazetteerEntry:
    lat: float
    lon: float
    address: StructuredAddress


class Gazetteer:
    """Nearest-entry lookup over a local CSV of places."""

    def __init__(self, entries, radius_m: float = 250.0):
        self.entries = list(entries)
        self.radius_m = radius_m

    @classmethod
    def load(cls, path, radius_m: float = 250.0) -> "Gazetteer":
        entries = []
        with open(path, newline="", encoding="utf-8") as fh:
            for lineno, row in enumerate(csv.DictReader(fh), start=2):
                try:
                    lat, lon = float(row["lat"]), float(row["lon"])
                    check_lat_lon(lat, lon)
                except (KeyError, TypeError, ValueError) as exc:
                    raise InvalidInput(f"{path}:{lineno}: bad gazetteer row ({exc})") from None
                addr = StructuredAddress.from_dict({**row, "provenance": "offline"})
                entries.append(GazetteerEntry(lat, lon, addr))
        return cls(entries, radius_m)

    def nearest(self, lat: float, lon: float) -> tuple[GazetteerEntry, float]:
        if not self.entries:
            raise NoCoverage("gazetteer is empty")
        return min(((e, haversine_m(lat, lon, e.lat, e.lon)) for e in self.entries), key=lambda t: t[1])

    def reverse(self, lat: float, lon: float) -> StructuredAddress:
        entry, dist = self.nearest(lat, lon)
        if dist > self.radius_m:
            raise NoCoverage(f"nearest gazetteer entry is {dist:.0f} m away (radius {self.radius_m:.0f} m)")
        return entry.address


def lookup_gazetteer(fix: GeoFix, gazetteer: Gazetteer) -> StructuredAddress:
    return gazetteer.reverse(fix.lat, fix.lon)


class ReverseGeocoder:
    """Provider + offline fallback + LRU cache keyed on 4-decimal coordinates."""

    def __init__(self, provider: GeocodeProvider | None, fallback: Gazetteer | None = None, cache_size: int = 4096):
        if provider is None and fallback is None:
            raise InvalidInput("need a provider or a gazetteer")
        self.provider = provider
        self.fallback = fallback
        self.cache_size = cache_size
        self._cache: OrderedDict[tuple[float, float], StructuredAddress] = OrderedDict()
        self._lock = threading.Lock()

    def reverse(self, fix: GeoFix) -> StructuredAddress:
        check_lat_lon(fix.lat, fix.lon)
        key = (round(fix.lat, 4), round(fix.lon, 4))
        with self._lock:
            if key in self._cache:
                self._cache.move_to_end(key)
                return self._cache[key]
        addr = self._resolve(fix)
        with self._lock:
            self._cache[key] = addr
            self._cache.move_to_end(key)
            while len(self._cache) > self.cache_size:
                self._cache.popitem(last=False)
        return addr

    def _resolve(self, fix: GeoFix) -> StructuredAddress:
        if self.provider is not None:
            try:
                return self.provider.reverse(fix.lat, fix.lon)
            except (ProviderError, NoCoverage):
                if self.fallback is None:
                    raise
        addr = self.fallback.reverse(fix.lat, fix.lon)
        return replace(addr, provenance="offline")


def reverse_geocode(fix: GeoFix, provider: GeocodeProvider | None, fallback: Gazetteer | None = None) -> StructuredAddress:
    """One-shot lookup without a shared cache."""
    return ReverseGeocoder(provider, fallback, cache_size=1).reverse(fix)


@dataclass(frozen=True)
class Beacon:
    building: str
    floor: int
    room: str = ""

    def describe(self) -> str:
        text = f"Building {self.building}, floor {self.floor}"
        return f"{text}, room {self.room}" if self.room else text


def load_beacon_map(path) -> dict[str, Beacon]:
    """Read ``{ssid_or_mac: {"building", "floor", "room"}}`` JSON."""
    raw = json.loads(Path(path).read_text(encoding="utf-8"))
    return {k: Beacon(str(v["building"]), int(v["floor"]), str(v.get("room", ""))) for k, v in raw.items()}


def refine_with_beacons(addr: StructuredAddress, fix: GeoFix, beacons: dict[str, Beacon]) -> StructuredAddress:
    observed = set(fix.wifi_ssids) | set(fix.bt_macs)
    matches = sorted(k for k in observed if k in beacons)
    if not matches:
        return addr
    detail = beacons[matches[0]].describe()
    place = f"{addr.place_type}; {detail}" if addr.place_type else detail
    return replace(addr, place_type=place)
