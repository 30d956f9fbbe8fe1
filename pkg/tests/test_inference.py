from __future__ import annotations

import json
import threading
import time

import numpy as np
import pytest

from dailylog.errors import BackendError, BadResponseShape, ConfigError, HttpStatus, Timeout
from dailylog.imu_features import ImuFeatureVector
from dailylog.inference import (
    BackendConfig, CentroidModel, complete, load_synonyms, mock_infer, parse_context_response, render_schema_line,
)
from dailylog.geoloc import StructuredAddress
from dailylog.ingest import to_civil_time
from dailylog.promptgen import ContextBundle, build_context_prompt
from dailylog.vocab import ACTIVITIES


def _ok(text):
    return (200, {"choices": [{"message": {"role": "assistant", "content": text}}]})


def _cfg(url, **kw):
    kw.setdefault("backoff_s", 0.0)
    return BackendConfig(kind="http_chat", url=url, model_name="local", **kw)


@pytest.mark.parametrize("label", ACTIVITIES)
def test_schema_line_round_trip(label):
    line = render_schema_line("2024-01-01 10:00:00 +00:00", "1 Elm St (home)", label, "home")
    r = parse_context_response(line)
    assert (r.activity, r.scene, r.parse_ok) == (label, "home", True)


@pytest.mark.parametrize("text,label", [
    ("Activity category: Walking upstairs; scenario: office", "ascending_stairs"),
    ("The person seems to be jogging along the river.", "jogging"),
    ("activity category: seated", "sitting"),
    ("I cannot tell.", "unknown"),
    ("", "unknown"),
])
def test_synonyms_and_degradation(text, label):
    assert parse_context_response(text).activity == label


def test_synonym_table_covers_vocabulary():
    assert set(load_synonyms().values()) == set(ACTIVITIES)


def _model():
    a, b = np.zeros(26), np.ones(26)
    return CentroidModel.from_dict({"sitting": a.tolist(), "walking": b.tolist(), "__scale__": [1.0] * 26})


def _prompt(values):
    b = ContextBundle(to_civil_time(1704103200), StructuredAddress("1 Elm St", city="Hanover", place_type="residence"),
                      ImuFeatureVector(np.asarray(values, float), (1, 0, 0)))
    return build_context_prompt(b)


def test_mock_predicts_nearest_centroid():
    text = mock_infer(_prompt(np.full(26, 0.9)), _model())
    r = parse_context_response(text)
    assert r.activity == "walking" and r.scene == "residence"
    assert text.startswith("Date-time: 2024-01-01 10:00:00 +00:00; location information: 1 Elm St, Hanover")


def test_mock_tie_breaks_lexicographically():
    assert _model().predict(np.full(26, 0.5)) == "sitting"


def test_mock_is_pure_in_prompt_and_model_bytes():
    p = _prompt(np.linspace(0, 1, 26))
    raw = json.dumps(_model().to_dict()).encode()
    assert mock_infer(p, CentroidModel.from_bytes(raw)) == mock_infer(p.rendered, CentroidModel.from_bytes(raw))


def test_centroid_fit_and_file(tmp_path):
    rng = np.random.default_rng(0)
    X = np.vstack([rng.normal(0, 1, (20, 26)), rng.normal(5, 1, (20, 26))])
    m = CentroidModel.fit(X, ["lying"] * 20 + ["walking"] * 20)
    path = tmp_path / "m.json"
    path.write_text(json.dumps(m.to_dict()))
    m2 = CentroidModel.load(path)
    assert m2.predict(np.full(26, 4.0)) == "walking"
    np.testing.assert_array_equal(m2.scale, m.scale)


def test_centroid_validation():
    with pytest.raises(ConfigError):
        CentroidModel.from_dict({"a": [0.0] * 26})
    with pytest.raises(ConfigError):
        CentroidModel.from_dict({"a": [0.0] * 26, "b": [1.0] * 25})


def test_backend_config_validation(monkeypatch):
    with pytest.raises(ConfigError) as exc:
        BackendConfig(kind="http_chat")
    assert exc.value.field == "backend.url"
    with pytest.raises(ConfigError):
        BackendConfig(kind="gpt")
    monkeypatch.setenv("DAILYLOG_LLM_URL", "http://x")
    assert BackendConfig(kind="http_chat").effective_url == "http://x"


def test_http_request_shape(stub_server):
    stub_server.replies = [_ok("activity category: sitting")]
    assert complete("hello", _cfg(stub_server.url + "/v1/chat/completions")) == "activity category: sitting"
    method, path, _, body = stub_server.requests[0]
    assert (method, path) == ("POST", "/v1/chat/completions")
    assert body == {"model": "local", "messages": [{"role": "user", "content": "hello"}], "temperature": 0}


def test_retries_on_5xx_and_429(stub_server):
    stub_server.replies = [(503, {}), (429, {}), _ok("fine")]
    sleeps = []
    out = complete("p", _cfg(stub_server.url, max_retries=2, backoff_s=0.5), sleep=sleeps.append)
    assert out == "fine" and len(stub_server.requests) == 3
    assert sleeps == [0.5, 1.0]


def test_retries_exhausted(stub_server):
    stub_server.replies = [(500, {"error": "boom"})]
    with pytest.raises(HttpStatus) as exc:
        complete("p", _cfg(stub_server.url, max_retries=1), sleep=lambda s: None)
    assert exc.value.code == 500 and len(stub_server.requests) == 2


def test_client_errors_are_not_retried(stub_server):
    stub_server.replies = [(400, {"error": "bad"})]
    with pytest.raises(HttpStatus):
        complete("p", _cfg(stub_server.url, max_retries=3), sleep=lambda s: None)
    assert len(stub_server.requests) == 1


@pytest.mark.parametrize("reply", [(200, "nope"), (200, {"choices": []}), (200, {"choices": [{"message": {"content": 3}}]})])
def test_bad_response_shape(stub_server, reply):
    stub_server.replies = [reply]
    with pytest.raises(BadResponseShape):
        complete("p", _cfg(stub_server.url))


def test_bounded_latency_on_timeouts(stub_server):
    stub_server.delay_s = 1.0
    cfg = _cfg(stub_server.url, timeout_s=0.2, max_retries=1, backoff_s=0.05)
    t0 = time.monotonic()
    with pytest.raises(Timeout):
        complete("p", cfg)
    assert time.monotonic() - t0 <= cfg.latency_budget_s() + 0.5


def test_unreachable_is_backend_error():
    with pytest.raises(BackendError):
        complete("p", _cfg("http://127.0.0.1:9", timeout_s=0.5, max_retries=0))


def test_api_key_header(stub_server, monkeypatch):
    seen = []

    class Spy:
        def post(self, url, json, headers, timeout):
            seen.append(headers)
            raise __import__("requests").ConnectionError("no")

    monkeypatch.setenv("DAILYLOG_LLM_API_KEY", "sekrit")
    monkeypatch.setattr("dailylog.inference._session", lambda: Spy())
    with pytest.raises(BackendError):
        complete("p", _cfg(stub_server.url, max_retries=0))
    assert seen == [{"Authorization": "Bearer sekrit"}]


def test_concurrency_cap(stub_server):
    stub_server.delay_s = 0.2
    stub_server.replies = [_ok("x")]
    cfg = _cfg(stub_server.url + "/cap", max_concurrency=2)
    active, peak, lock = [0], [0], threading.Lock()
    import dailylog.inference as inf

    real = inf._post_with_retries

    def tracked(*a, **kw):
        with lock:
            active[0] += 1
            peak[0] = max(peak[0], active[0])
        try:
            return real(*a, **kw)
        finally:
            with lock:
                active[0] -= 1

    inf._post_with_retries = tracked
    try:
        threads = [threading.Thread(target=complete, args=("p", cfg)) for _ in range(6)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
    finally:
        inf._post_with_retries = real
    assert peak[0] == 2
