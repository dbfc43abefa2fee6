"""Shared fixtures: a configurable local block-header RPC server."""

from __future__ import annotations

import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from urllib.parse import parse_qs, urlparse

import pytest


def pytest_configure(config):
    config._acceptance_verdicts = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    # One line per numbered acceptance criterion, collected by
    # test_acceptance._report.  Written through the terminal reporter so
    # the verdicts appear even under default output capture.
    verdicts = getattr(config, "_acceptance_verdicts", [])
    if verdicts:
        terminalreporter.section("acceptance criteria")
        for line in verdicts:
            terminalreporter.write_line(line)


class RpcFixture:
    """In-process HTTP server mimicking a ``/block?height=H`` endpoint.

    Behavior is driven by mutable maps so each test can stage timestamps,
    transient failures, and malformed responses per height.  Every request
    is recorded as ``(height, authorization_header)``.
    """

    def __init__(self):
        self.timestamps: dict[int, str] = {}
        self.fail_budget: dict[int, int] = {}
        self.missing_time: set[int] = set()
        self.report_height: dict[int, str] = {}
        self.not_found: set[int] = set()
        self.requests: list[tuple[int, str | None]] = []
        self.server: ThreadingHTTPServer | None = None

    @property
    def url(self) -> str:
        host, port = self.server.server_address[:2]
        return f"http://{host}:{port}"


def _make_handler(fx: RpcFixture):
    class Handler(BaseHTTPRequestHandler):
        def log_message(self, *args):
            pass

        def _reply(self, status: int, payload) -> None:
            data = json.dumps(payload).encode("utf-8")
            self.send_response(status)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(data)))
            self.end_headers()
            self.wfile.write(data)

        def do_GET(self):
            parsed = urlparse(self.path)
            if parsed.path != "/block":
                self._reply(404, {"error": "unknown path"})
                return
            height = int(parse_qs(parsed.query)["height"][0])
            fx.requests.append((height, self.headers.get("Authorization")))
            if fx.fail_budget.get(height, 0) > 0:
                fx.fail_budget[height] -= 1
                self._reply(500, {"error": "transient"})
                return
            if height in fx.not_found:
                self._reply(404, {"error": "height not found"})
                return
            if height not in fx.timestamps:
                self._reply(200, {"jsonrpc": "2.0", "id": -1, "result": {}})
                return
            header = {"height": fx.report_height.get(height, str(height))}
            if height not in fx.missing_time:
                header["time"] = fx.timestamps[height]
            self._reply(
                200,
                {"jsonrpc": "2.0", "id": -1, "result": {"block": {"header": header}}},
            )

    return Handler


@pytest.fixture
def rpc_server():
    fx = RpcFixture()
    server = ThreadingHTTPServer(("127.0.0.1", 0), _make_handler(fx))
    fx.server = server
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    yield fx
    server.shutdown()
    thread.join(timeout=5.0)
    server.server_close()
