"""Text-generation backends and response parsing.

HTTP wire format (chat-completions style). Request body::

    {"model": <model_name>, "messages": [{"role": "user", "content": <prompt>}], "temperature": 0}

Accepted response body::

    {"choices": [{"message": {"content": <text>}}, ...]}

The mock backend answers from a nearest-centroid model over the accelerometer
block embedded in the prompt. Centroid files are JSON ``{label: [26 numbers]}``
with an optional ``"__scale__": [26 numbers]`` entry for per-dimension
normalization; without it the spread of the centroids themselves is used.
"""

from __future__ import annotations

import json
import logging
import os
import re
import threading
import time
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from pathlib import Path

import numpy as np
import requests

from .errors import BadResponseShape, BackendError, ConfigError, FeatureParseError, HttpStatus, Timeout
from .imu_features import BLOCK_SIZE
from .promptgen import Prompt, recover_imu_block
from .vocab import ACTIVITIES

log = logging.getLogger(__name__)

LLM_URL_ENV = "DAILYLOG_LLM_URL"
LLM_KEY_ENV = "DAILYLOG_LLM_API_KEY"
SCALE_KEY = "__scale__"


@dataclass(frozen=True)
class BackendConfig:
    kind: str = "mock"
    url: str | None = None
    model_name: str = "mock-centroid"
    timeout_s: float = 30.0
    max_retries: int = 2
    backoff_s: float = 0.5
    max_concurrency: int = 4
    centroid_path: str | None = None

    def __post_init__(self):
        if self.kind not in ("http_chat", "mock"):
            raise ConfigError("backend.kind", f"unknown backend {self.kind!r}")
        if self.kind == "http_chat" and not self.effective_url:
            raise ConfigError("backend.url", f"required for http_chat (or set {LLM_URL_ENV})")
        if self.kind == "mock" and self.url:
            raise ConfigError("backend.url", "only valid for http_chat")
        if not self.timeout_s > 0:
            raise ConfigError("backend.timeout_s", "must be > 0")
        if not 0 <= self.max_retries <= 10:
            raise ConfigError("backend.max_retries", "must be in 0..10")
        if self.backoff_s < 0 or self.max_concurrency < 1:
            raise ConfigError("backend", "backoff_s must be >= 0 and max_concurrency >= 1")

    @property
    def effective_url(self) -> str | None:
        if self.kind != "http_chat":
            return None
        return os.environ.get(LLM_URL_ENV) or self.url

    def latency_budget_s(self) -> float:
        """Upper bound on time spent inside one :func:`complete` call."""
        n = self.max_retries + 1
        return self.timeout_s * n + self.backoff_s * (2 ** self.max_retries - 1)


@dataclass(frozen=True)
class ActivityInference:
    activity: str
    scene: str
    raw_text: str
    parse_ok: bool


# ---------------------------------------------------------------------------
# Response parsing


@lru_cache(maxsize=None)
def load_synonyms(version: str = "synonyms-v1") -> dict[str, str]:
    """Phrase -> activity label, read from the packaged data file."""
    text = resources.files("dailylog").joinpath("data", f"{version}.json").read_text(encoding="utf-8")
    table = json.loads(text)["synonyms"]
    out = {}
    for label, phrases in table.items():
        if label not in ACTIVITIES:
            raise ValueError(f"synonym table maps to unknown label {label!r}")
        for phrase in phrases:
            out[_normalize(phrase)] = label
    return out


def _normalize(text: str) -> str:
    return re.sub(r"[\s_\-]+", " ", text.strip().lower()).strip(" .!,'\"")


def _match_label(text: str) -> str | None:
    return load_synonyms().get(_normalize(text))


def _scan_label(text: str) -> str | None:
    norm = " " + re.sub(r"[^a-z]+", " ", text.lower()) + " "
    best = None
    for phrase, label in load_synonyms().items():
        pos = norm.find(f" {phrase} ")
        if pos < 0:
            continue
        key = (pos, -len(phrase))
        if best is None or key < best[0]:
            best = (key, label)
    return None if best is None else best[1]


_ACTIVITY_FIELD = re.compile(r"activity\s+category\s*:\s*([^;\n]*)", re.IGNORECASE)
_SCENARIO_FIELD = re.compile(r"scenario\s*:\s*([^;\n]*)", re.IGNORECASE)


def parse_context_response(text: str) -> ActivityInference:
    """Extract activity and scenario; never raises, degrading to ``unknown``."""
    text = text or ""
    act_m = _ACTIVITY_FIELD.search(text)
    scen_m = _SCENARIO_FIELD.search(text)
    scene = scen_m.group(1).strip() if scen_m else ""
    if act_m:
        label = _match_label(act_m.group(1)) or _scan_label(act_m.group(1))
        if label is not None:
            return ActivityInference(label, scene, text, True)
    label = _scan_label(text)
    return ActivityInference(label or "unknown", scene, text, False)


def render_schema_line(date_time: str, location: str, activity: str, scenario: str) -> str:
    return f"Date-time: {date_time}; location information: {location}; activity category: {activity}; scenario: {scenario}"


# ---------------------------------------------------------------------------
# Nearest-centroid mock


@dataclass(frozen=True, eq=False)
class CentroidModel:
    centroids: dict[str, np.ndarray]
    scale: np.ndarray

    def __post_init__(self):
        if len(self.centroids) < 2:
            raise ConfigError("centroids", "need at least 2 labels")
        for label, vec in self.centroids.items():
            if np.shape(vec) != (BLOCK_SIZE,):
                raise ConfigError("centroids", f"{label}: expected {BLOCK_SIZE} values")
        if np.shape(self.scale) != (BLOCK_SIZE,) or np.any(np.asarray(self.scale) <= 0):
            raise ConfigError("centroids", "scale must be 26 positive numbers")

    @staticmethod
    def _safe_scale(s: np.ndarray) -> np.ndarray:
        s = np.asarray(s, dtype=float).copy()
        s[~(s > 1e-12)] = 1.0
        return s

    @classmethod
    def from_dict(cls, d: dict) -> "CentroidModel":
        cents = {k: np.asarray(v, dtype=float) for k, v in d.items() if k != SCALE_KEY}
        for label, vec in cents.items():
            if vec.shape != (BLOCK_SIZE,):
                raise ConfigError("centroids", f"{label}: expected {BLOCK_SIZE} values")
        if SCALE_KEY in d:
            scale = np.asarray(d[SCALE_KEY], dtype=float)
        else:
            scale = cls._safe_scale(np.std(np.stack(list(cents.values())), axis=0)) if cents else np.ones(BLOCK_SIZE)
        return cls(cents, scale)

    @classmethod
    def from_bytes(cls, raw: bytes) -> "CentroidModel":
        return cls.from_dict(json.loads(raw.decode("utf-8")))

    @classmethod
    def load(cls, path) -> "CentroidModel":
        return cls.from_bytes(Path(path).read_bytes())

    @classmethod
    def fit(cls, features, labels) -> "CentroidModel":
        """Class means with pooled within-class std as the scale."""
        X = np.asarray(features, dtype=float)
        labels = list(labels)
        cents, resid = {}, []
        for label in sorted(set(labels)):
            rows = X[[i for i, l in enumerate(labels) if l == label]]
            cents[label] = rows.mean(axis=0)
            resid.append(rows - cents[label])
        return cls(cents, cls._safe_scale(np.sqrt(np.mean(np.vstack(resid) ** 2, axis=0))))

    def to_dict(self) -> dict:
        d = {k: [float(x) for x in v] for k, v in sorted(self.centroids.items())}
        d[SCALE_KEY] = [float(x) for x in self.scale]
        return d

    def predict(self, features: np.ndarray) -> str:
        z = np.asarray(features, dtype=float) / self.scale
        scored = [(float(np.sum((z - c / self.scale) ** 2)), label) for label, c in self.centroids.items()]
        return min(scored)[1]


_CONTEXT_LINE = re.compile(r"Date-time:\s*(.*?)\s{2,}Location:\s*(.*)$", re.MULTILINE)


def mock_infer(p: Prompt | str, m: CentroidModel) -> str:
    text = p.rendered if isinstance(p, Prompt) else p
    features = recover_imu_block(text, "accel")
    label = m.predict(features)
    ctx = _CONTEXT_LINE.search(text)
    date_time, location = (ctx.group(1).strip(), ctx.group(2).strip()) if ctx else ("unknown", "unknown")
    place = re.search(r"\(([^()]*)\)\s*$", location)
    return render_schema_line(date_time, location, label, place.group(1) if place else "unspecified")


# ---------------------------------------------------------------------------
# Dispatch

_semaphores: dict[str, threading.BoundedSemaphore] = {}
_sem_lock = threading.Lock()
_sessions = threading.local()


def _semaphore(cfg: BackendConfig) -> threading.BoundedSemaphore:
    key = cfg.effective_url or "mock"
    with _sem_lock:
        if key not in _semaphores:
            _semaphores[key] = threading.BoundedSemaphore(cfg.max_concurrency)
        return _semaphores[key]


def _session() -> requests.Session:
    if not hasattr(_sessions, "s"):
        _sessions.s = requests.Session()
    return _sessions.s


def complete(p: Prompt | str, cfg: BackendConfig, model: CentroidModel | None = None, sleep=time.sleep) -> str:
    """Send a prompt to the configured backend and return the reply text."""
    text = p.rendered if isinstance(p, Prompt) else p
    if cfg.kind == "mock":
        if model is None:
            if not cfg.centroid_path:
                raise BackendError("mock backend needs a centroid model")
            model = CentroidModel.load(cfg.centroid_path)
        return mock_infer(text, model)
    with _semaphore(cfg):
        return _post_with_retries(text, cfg, sleep)


def _post_with_retries(text: str, cfg: BackendConfig, sleep) -> str:
    body = {"model": cfg.model_name, "messages": [{"role": "user", "content": text}], "temperature": 0}
    headers = {}
    if os.environ.get(LLM_KEY_ENV):
        headers["Authorization"] = f"Bearer {os.environ[LLM_KEY_ENV]}"
    last: BackendError | None = None
    for attempt in range(cfg.max_retries + 1):
        if attempt:
            sleep(cfg.backoff_s * 2 ** (attempt - 1))
        try:
            resp = _session().post(cfg.effective_url, json=body, headers=headers, timeout=cfg.timeout_s)
        except requests.Timeout as exc:
            last = Timeout(f"no reply within {cfg.timeout_s}s: {exc}")
            continue
        except requests.RequestException as exc:
            last = BackendError(f"transport error: {exc}")
            continue
        if resp.status_code >= 500 or resp.status_code == 429:
            last = HttpStatus(resp.status_code, resp.text)
            log.warning("backend returned %s (attempt %d)", resp.status_code, attempt + 1)
            continue
        if resp.status_code != 200:
            raise HttpStatus(resp.status_code, resp.text)
        return _extract_content(resp)
    assert last is not None
    raise last


def _extract_content(resp: requests.Response) -> str:
    try:
        data = resp.json()
    except ValueError:
        raise BadResponseShape("response body is not JSON") from None
    try:
        content = data["choices"][0]["message"]["content"]
    except (KeyError, IndexError, TypeError):
        raise BadResponseShape("response lacks choices[0].message.content") from None
    if not isinstance(content, str):
        raise BadResponseShape("message content is not a string")
    return content


def infer_activity(p: Prompt, cfg: BackendConfig, model: CentroidModel | None = None) -> ActivityInference:
    return parse_context_response(complete(p, cfg, model))
