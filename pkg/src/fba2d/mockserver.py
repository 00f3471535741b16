"""In-process HTTP detector server speaking the package's oracle protocol.

Wraps any local Oracle behind the same wire format HttpOracle talks, for
integration tests and local demos: POST {"image_png_base64": ...} in, 200
{"label": 0|1} out.  Fault injection (5xx bursts, malformed bodies, dropped
connections) is built in so client retry behavior can be exercised.
"""

from __future__ import annotations

import base64
import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

from .pngio import decode_png

__all__ = ["MockDetectorServer"]


class MockDetectorServer:
    """Serve a wrapped oracle over HTTP on 127.0.0.1.

    Usage:
        with MockDetectorServer(oracle) as server:
            client = HttpOracle(server.url)
            client.query(image)

    ``fail_next(n, mode)`` makes the next n requests fail before normal
    service resumes; modes: "error" (HTTP 503), "malformed" (200 with an
    out-of-range label), "garbage" (200 with a non-JSON body), "drop"
    (connection closed without a response).
    """

    def __init__(self, oracle, host="127.0.0.1", port=0, token=None):
        self.oracle = oracle
        self.token = token
        self._failures = []
        self._lock = threading.Lock()

        server = self

        class Handler(BaseHTTPRequestHandler):
            protocol_version = "HTTP/1.1"

            def log_message(self, fmt, *args):
                pass

            def _reply(self, status, payload):
                body = payload if isinstance(payload, bytes) else json.dumps(payload).encode()
                self.send_response(status)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(body)))
                self.end_headers()
                self.wfile.write(body)

            def do_POST(self):
                # Drain the request body up front so early replies (injected
                # failures, auth rejections) leave the keep-alive connection
                # aligned on the next request boundary.
                try:
                    length = int(self.headers.get("Content-Length", "0"))
                except ValueError:
                    length = 0
                raw = self.rfile.read(length) if length > 0 else b""
                failure = server._pop_failure()
                if failure == "error":
                    self._reply(503, {"error": "injected failure"})
                    return
                if failure == "malformed":
                    self._reply(200, {"label": 2})
                    return
                if failure == "garbage":
                    self._reply(200, b"not json at all")
                    return
                if failure == "drop":
                    self.close_connection = True
                    self.connection.close()
                    return
                if server.token is not None:
                    expected = f"Bearer {server.token}"
                    if self.headers.get("Authorization") != expected:
                        self._reply(401, {"error": "unauthorized"})
                        return
                try:
                    body = json.loads(raw)
                    image = decode_png(base64.b64decode(body["image_png_base64"]))
                except Exception as exc:
                    self._reply(400, {"error": f"bad request: {exc}"})
                    return
                try:
                    label = server.oracle.query(image)
                except Exception as exc:
                    self._reply(500, {"error": f"oracle failure: {exc}"})
                    return
                self._reply(200, {"label": int(label)})

        self._httpd = ThreadingHTTPServer((host, port), Handler)
        self._httpd.daemon_threads = True
        self._thread = threading.Thread(target=self._httpd.serve_forever, daemon=True)

    def _pop_failure(self):
        with self._lock:
            if self._failures:
                return self._failures.pop(0)
        return None

    def fail_next(self, count=1, mode="error"):
        if mode not in ("error", "malformed", "garbage", "drop"):
            raise ValueError(f"unknown failure mode {mode!r}")
        with self._lock:
            self._failures.extend([mode] * count)

    @property
    def url(self):
        host, port = self._httpd.server_address[:2]
        return f"http://{host}:{port}/detect"

    def start(self):
        self._thread.start()
        return self

    def stop(self):
        self._httpd.shutdown()
        self._httpd.server_close()

    def __enter__(self):
        return self.start()

    def __exit__(self, *exc_info):
        self.stop()
        return False
