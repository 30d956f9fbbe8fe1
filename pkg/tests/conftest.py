from __future__ import annotations

import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from urllib.parse import parse_qs, urlparse

import pytest


class StubServer:
    """Local HTTP server answering from a queue of (status, body) replies.

    When the queue runs dry the last reply repeats. ``requests`` records
    (method, path, query, json_body) for every hit.
    """

    def __init__(self):
        self.replies: list[tuple[int, object]] = [(200, {})]
        self.requests: list[tuple] = []
        self.delay_s = 0.0
        stub = self

        class Handler(BaseHTTPRequestHandler):
            def _reply(self, body=None):
                url = urlparse(self.path)
                stub.requests.append((self.command, url.path, parse_qs(url.query), body))
                if stub.delay_s:
                    threading.Event().wait(stub.delay_s)
                status, payload = stub.replies.pop(0) if len(stub.replies) > 1 else stub.replies[0]
                data = payload.encode() if isinstance(payload, str) else json.dumps(payload).encode()
                self.send_response(status)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(data)))
                self.end_headers()
                self.wfile.write(data)

            def do_GET(self):
                self._reply()

            def do_POST(self):
                n = int(self.headers.get("Content-Length", 0))
                self._reply(json.loads(self.rfile.read(n) or b"null"))

            def log_message(self, *args):
                pass

        self.httpd = ThreadingHTTPServer(("127.0.0.1", 0), Handler)
        self.url = f"http://127.0.0.1:{self.httpd.server_address[1]}"
        self.thread = threading.Thread(target=self.httpd.serve_forever, daemon=True)
        self.thread.start()

    def close(self):
        self.httpd.shutdown()
        self.httpd.server_close()


@pytest.fixture
def stub_server():
    s = StubServer()
    yield s
    s.close()


@pytest.fixture(autouse=True)
def _no_env_endpoints(monkeypatch):
    for var in ("DAILYLOG_LLM_URL", "DAILYLOG_GEOCODE_URL", "DAILYLOG_LLM_API_KEY"):
        monkeypatch.delenv(var, raising=False)


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: s[7:11]):
            terminalreporter.write_line(line)
