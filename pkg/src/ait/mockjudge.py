"""A local OpenAI-compatible mock judge endpoint.

Serves POST /chat/completions (also under /v1).  The requested ``model``
selects the reply behavior, which makes one server reusable for every
judge test and demo without configuration:

* ``clean``        -> ``{"score": 0.9, "explanation": "close"}``
* ``out-of-range`` -> ``{"score": 1.7, ...}`` (exercises clamping)
* ``prose``        -> chatty text with an embedded ``{"score": 0.5, ...}``
* ``malformed``    -> no JSON object at all
* ``fail-once``    -> HTTP 500 on the first request per model, then clean
* ``fail-always``  -> HTTP 500 every time
* ``require-auth`` -> HTTP 401 without a Bearer token, else clean
* anything else    -> clean behavior

The grader echoes nothing about the actual outputs: scores are fixed per
model, which keeps expectations exact.
"""

from __future__ import annotations

import json
import threading
from collections import Counter
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from typing import Any, Optional

CLEAN_CONTENT = '{"score": 0.9, "explanation": "close"}'
OUT_OF_RANGE_CONTENT = '{"score": 1.7, "explanation": "overconfident"}'
PROSE_CONTENT = (
    "The generated answer looks mostly right to me."
    ' {"score": 0.5, "explanation": "partial match"} Hope that helps!'
)
MALFORMED_CONTENT = "I refuse to emit JSON today."

_PATHS = ("/chat/completions", "/v1/chat/completions")


class _JudgeHTTPServer(ThreadingHTTPServer):
    def __init__(self, address: tuple[str, int]) -> None:
        super().__init__(address, _Handler)
        self.lock = threading.Lock()
        self.request_count = 0
        self.requests: list[dict[str, Any]] = []
        self.per_model_counts: Counter[str] = Counter()


class _Handler(BaseHTTPRequestHandler):
    server: "_JudgeHTTPServer"

    def do_POST(self) -> None:  # noqa: N802 (http.server API)
        if self.path not in _PATHS:
            self._send(404, {"error": {"message": f"unknown path {self.path}"}})
            return
        try:
            length = int(self.headers.get("Content-Length", "0"))
            body = json.loads(self.rfile.read(length) or b"{}")
            model = str(body.get("model", "clean"))
        except (ValueError, KeyError):
            self._send(400, {"error": {"message": "bad request body"}})
            return
        auth = self.headers.get("Authorization", "")
        with self.server.lock:
            self.server.request_count += 1
            self.server.requests.append(
                {"model": model, "path": self.path, "authorized": auth.startswith("Bearer ")}
            )
            per_model = self.server.per_model_counts
            per_model[model] += 1
            nth = per_model[model]

        if model == "fail-always":
            self._send(500, {"error": {"message": "synthetic failure"}})
            return
        if model == "fail-once" and nth == 1:
            self._send(500, {"error": {"message": "synthetic transient failure"}})
            return
        if model == "require-auth" and not (auth.startswith("Bearer ") and len(auth) > 7):
            self._send(401, {"error": {"message": "missing bearer token"}})
            return
        content = {
            "out-of-range": OUT_OF_RANGE_CONTENT,
            "prose": PROSE_CONTENT,
            "malformed": MALFORMED_CONTENT,
        }.get(model, CLEAN_CONTENT)
        self._send(
            200,
            {
                "id": "mock-judge",
                "object": "chat.completion",
                "model": model,
                "choices": [
                    {
                        "index": 0,
                        "message": {"role": "assistant", "content": content},
                        "finish_reason": "stop",
                    }
                ],
                "usage": {"prompt_tokens": 10, "completion_tokens": 5, "total_tokens": 15},
            },
        )

    def _send(self, status: int, payload: dict[str, Any]) -> None:
        blob = json.dumps(payload).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(blob)))
        self.end_headers()
        self.wfile.write(blob)

    def log_message(self, format: str, *args: Any) -> None:
        pass  # keep test output quiet


class MockJudgeServer:
    """In-process mock endpoint; also runnable standalone via the CLI."""

    def __init__(self, host: str = "127.0.0.1", port: int = 0) -> None:
        self._httpd = _JudgeHTTPServer((host, port))
        self._thread: Optional[threading.Thread] = None

    @property
    def host(self) -> str:
        return self._httpd.server_address[0]

    @property
    def port(self) -> int:
        return self._httpd.server_address[1]

    @property
    def url(self) -> str:
        return f"http://{self.host}:{self.port}"

    @property
    def request_count(self) -> int:
        return self._httpd.request_count

    @property
    def requests(self) -> list[dict[str, Any]]:
        return self._httpd.requests

    @property
    def per_model_counts(self) -> dict[str, int]:
        with self._httpd.lock:
            return dict(self._httpd.per_model_counts)

    def start(self) -> "MockJudgeServer":
        self._thread = threading.Thread(
            target=self._httpd.serve_forever, name="ait-mock-judge", daemon=True
        )
        self._thread.start()
        return self

    def stop(self) -> None:
        self._httpd.shutdown()
        self._httpd.server_close()
        if self._thread is not None:
            self._thread.join(timeout=5)

    def __enter__(self) -> "MockJudgeServer":
        return self.start()

    def __exit__(self, *exc_info: object) -> None:
        self.stop()

    def serve_forever(self) -> None:
        self._httpd.serve_forever()
