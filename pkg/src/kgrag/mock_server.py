"""Serve a mock adapter over the wire protocol for conformance testing.

The in-process mock may return lenient judge output (free-text mode); the
wire must stay strict, so selections are clamped to a sorted, in-range,
duplicate-free index list before they leave the server, and an unparseable
reply becomes an empty selection with a metadata flag.
"""

from __future__ import annotations

import json
import logging
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

from .adapter import MockAdapter

logger = logging.getLogger(__name__)


def _clamp_selection(selected: tuple[int, ...] | None, n_paths: int) -> tuple[list[int], bool]:
    if selected is None:
        return [], True
    return sorted({i for i in selected if 0 <= i < n_paths}), False


class _MockHandler(BaseHTTPRequestHandler):
    server_version = "kgrag-mock/0.1"
    mock: MockAdapter  # set on the server class per instance
    auth_token: str | None

    def log_message(self, fmt, *args):  # route through logging, not stderr
        logger.debug("mock server: " + fmt, *args)

    def _reply(self, status: int, body: dict) -> None:
        data = json.dumps(body, ensure_ascii=False).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json; charset=utf-8")
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)

    def _authorized(self) -> bool:
        token = getattr(self.server, "auth_token", None)
        if not token:
            return True
        header = self.headers.get("Authorization", "")
        return header == f"Bearer {token}"

    def do_GET(self) -> None:
        if not self._authorized():
            self._reply(401, {"error": "unauthorized"})
            return
        if self.path == "/v1/health":
            self._reply(200, self.server.mock.health())
        else:
            self._reply(404, {"error": f"unknown endpoint {self.path}"})

    def do_POST(self) -> None:
        if not self._authorized():
            self._reply(401, {"error": "unauthorized"})
            return
        try:
            length = int(self.headers.get("Content-Length", "0"))
            payload = json.loads(self.rfile.read(length).decode("utf-8"))
        except (ValueError, json.JSONDecodeError):
            self._reply(400, {"error": "invalid JSON body"})
            return
        mock = self.server.mock
        try:
            if self.path == "/v1/score_paths":
                question, paths = payload["question"], payload["paths"]
                self._reply(200, {"scores": mock.score_paths(question, paths)})
            elif self.path == "/v1/judge":
                question, paths = payload["question"], payload["paths"]
                reply = mock.judge(question, paths)
                selected, unparseable = _clamp_selection(reply.selected, len(paths))
                body = {"selected": selected}
                if unparseable:
                    body["unparseable"] = True
                self._reply(200, body)
            elif self.path == "/v1/answer":
                reply = mock.answer(payload["prompt"], int(payload.get("max_new_tokens", 256)))
                self._reply(200, {
                    "answers": [{"text": a.text, "confidence": a.confidence} for a in reply.answers],
                    "raw_text": reply.raw_text,
                })
            else:
                self._reply(404, {"error": f"unknown endpoint {self.path}"})
        except KeyError as exc:
            self._reply(400, {"error": f"missing field {exc}"})
        except Exception as exc:  # fixture misuse and the like
            self._reply(500, {"error": str(exc)})


def make_server(mock: MockAdapter, host: str = "127.0.0.1", port: int = 0,
                auth_token: str | None = None) -> ThreadingHTTPServer:
    """Build (but do not start) a wire-protocol server around a mock handle."""
    server = ThreadingHTTPServer((host, port), _MockHandler)
    server.mock = mock
    server.auth_token = auth_token
    return server


class MockServerThread:
    """Context manager running the mock server on a background thread."""

    def __init__(self, mock: MockAdapter, host: str = "127.0.0.1", port: int = 0,
                 auth_token: str | None = None):
        self.server = make_server(mock, host, port, auth_token)
        self._thread = threading.Thread(target=self.server.serve_forever, daemon=True)

    @property
    def base_url(self) -> str:
        host, port = self.server.server_address[:2]
        return f"http://{host}:{port}"

    def __enter__(self) -> "MockServerThread":
        self._thread.start()
        return self

    def __exit__(self, *exc) -> None:
        self.server.shutdown()
        self.server.server_close()
        self._thread.join(timeout=5)
