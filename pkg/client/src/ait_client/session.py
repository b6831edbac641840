"""Outbound trace session: the client half of the wire protocol.

One TCP connection per run: a handshake line, then one JSON event per
line with seq starting at 1. Emission is fire-and-forget through one
bounded internal queue consumed by a sender thread, so multi-threaded
user code gets per-connection seq ordering for free and a stalled
socket can never block user code. When the queue overflows, events are
dropped and counted; one warning event goes out before run_end. seq is
assigned at send time, so drops never create sequence gaps.
"""

from __future__ import annotations

import json
import logging
import os
import queue
import socket
import threading
import time
import uuid
from typing import Any, Optional

log = logging.getLogger("ait_client")

PROTOCOL_VERSION = 1
BUFFER_LIMIT = 1000

_CONNECT_TIMEOUT_S = 5.0
_DRAIN_TIMEOUT_S = 5.0
_SHUTDOWN_PUT_TIMEOUT_S = 5.0
_CLOSE = object()

_JSON_OPTS = {"separators": (",", ":"), "ensure_ascii": False, "allow_nan": False}


def now_ms() -> int:
    return time.time_ns() // 1_000_000


def compact_json(value: Any) -> str:
    return json.dumps(value, **_JSON_OPTS)


def normalize_usage(usage: Any) -> Optional[dict[str, int]]:
    """Token counts from framework metadata; total is recomputed."""
    if not isinstance(usage, dict):
        return None

    def _count(key: str) -> Optional[int]:
        value = usage.get(key, 0)
        if isinstance(value, bool) or not isinstance(value, int) or value < 0:
            return None
        return value

    prompt = _count("prompt_tokens")
    completion = _count("completion_tokens")
    # any malformed field discredits the whole record
    if prompt is None or completion is None or prompt == completion == 0:
        return None
    return {
        "prompt_tokens": prompt,
        "completion_tokens": completion,
        "total_tokens": prompt + completion,
    }


class ClientSession:
    """One run's event stream; safe to use from any thread.

    The address defaults to AIT_TRACE_ADDR and the run id to AIT_RUN_ID
    (a fresh UUID otherwise). With no address, or an unreachable one,
    the session stays disabled and every call is a cheap no-op.
    """

    def __init__(
        self,
        address: Optional[str] = None,
        run_id: Optional[str] = None,
        framework: str = "",
        buffer_limit: int = BUFFER_LIMIT,
    ) -> None:
        self.address = address if address is not None else os.environ.get("AIT_TRACE_ADDR") or None
        self.run_id = run_id or os.environ.get("AIT_RUN_ID") or str(uuid.uuid4())
        self.framework = framework
        self.connected = False
        self.closed = False
        self.root_span_id = "root"
        self._queue: queue.Queue[Any] = queue.Queue(maxsize=buffer_limit)
        self._sock: Optional[socket.socket] = None
        self._sender: Optional[threading.Thread] = None
        self._seq = 0
        self._lock = threading.Lock()
        self._dropped = 0
        self._run_ended = False

    # -- lifecycle -----------------------------------------------------------

    def start(self) -> bool:
        """Connect and send the handshake; False (still usable, inert) on any failure."""
        if self.connected or self.closed:
            return self.connected
        if not self.address:
            return False
        host, _, port_text = self.address.rpartition(":")
        try:
            port = int(port_text)
            sock = socket.create_connection((host or "127.0.0.1", port), timeout=_CONNECT_TIMEOUT_S)
        except (OSError, ValueError) as exc:
            log.debug("tracing disabled: cannot reach %r: %s", self.address, exc)
            return False
        sock.settimeout(None)
        handshake = {
            "hello": {
                "protocol_version": PROTOCOL_VERSION,
                "run_id": self.run_id,
                "framework": self.framework,
                "client_pid": os.getpid(),
                "started_ts_unix_ms": now_ms(),
            }
        }
        try:
            sock.sendall((compact_json(handshake) + "\n").encode("utf-8"))
        except OSError as exc:
            log.debug("tracing disabled: handshake failed: %s", exc)
            sock.close()
            return False
        self._sock = sock
        self.connected = True
        self._sender = threading.Thread(target=self._send_loop, name="ait-client-sender", daemon=True)
        self._sender.start()
        return True

    def close(self) -> None:
        """Flush the queue, half-close, and wait for the server to finalize."""
        if self.closed:
            return
        self.closed = True
        if self._sender is not None:
            try:
                self._queue.put(_CLOSE, timeout=_SHUTDOWN_PUT_TIMEOUT_S)
            except queue.Full:
                pass
            self._sender.join(timeout=_SHUTDOWN_PUT_TIMEOUT_S)
        if self._sock is not None:
            # half-close then read until the server closes, so the
            # session is finalized before this process exits
            try:
                self._sock.shutdown(socket.SHUT_WR)
                self._sock.settimeout(_DRAIN_TIMEOUT_S)
                while self._sock.recv(4096):
                    pass
            except OSError:
                pass
            self._sock.close()
        self.connected = False

    # -- emission ------------------------------------------------------------

    def emit(
        self,
        kind: str,
        span_id: str,
        name: str = "",
        payload: Any = None,
        parent_span_id: Optional[str] = None,
        usage: Optional[dict[str, int]] = None,
        ts_unix_ms: Optional[int] = None,
    ) -> None:
        if not self.connected or self._run_ended or self.closed:
            return
        item = {
            "kind": kind,
            "span_id": span_id,
            "name": name,
            "payload": payload,
            "parent_span_id": parent_span_id,
            "usage": usage,
            "ts_unix_ms": now_ms() if ts_unix_ms is None else ts_unix_ms,
        }
        try:
            self._queue.put_nowait(item)
        except queue.Full:
            with self._lock:
                self._dropped += 1

    def run_start(self, payload: Any = None, span_id: str = "root") -> None:
        self.root_span_id = span_id
        self.emit("run_start", span_id, payload={} if payload is None else payload)

    def error(self, message: str, span_id: Optional[str] = None) -> None:
        self.emit(
            "error",
            span_id if span_id is not None else self.root_span_id,
            payload={"message": message},
        )

    def run_end(self, payload: Any = None) -> None:
        """Close out the run; blocks briefly rather than dropping the end."""
        if not self.connected or self._run_ended or self.closed:
            return
        self._run_ended = True
        item = {
            "kind": "run_end",
            "span_id": self.root_span_id,
            "name": "",
            "payload": {} if payload is None else payload,
            "parent_span_id": None,
            "usage": None,
            "ts_unix_ms": now_ms(),
        }
        try:
            self._queue.put(item, timeout=_SHUTDOWN_PUT_TIMEOUT_S)
        except queue.Full:
            log.debug("tracing queue stuck; dropping run_end")

    # -- sender thread ---------------------------------------------------------

    def _encode(self, item: dict[str, Any]) -> Optional[bytes]:
        record: dict[str, Any] = {
            "seq": 0,  # placeholder; assigned only when the encode succeeds
            "run_id": self.run_id,
            "span_id": item["span_id"],
        }
        if item["parent_span_id"] is not None:
            record["parent_span_id"] = item["parent_span_id"]
        record["kind"] = item["kind"]
        record["name"] = item["name"]
        record["ts_unix_ms"] = item["ts_unix_ms"]
        record["payload"] = item["payload"]
        usage = normalize_usage(item["usage"])
        if usage is not None:
            record["usage"] = usage
        try:
            compact_json(record)
        except (TypeError, ValueError) as exc:
            log.debug("dropping unencodable %s event: %s", item["kind"], exc)
            with self._lock:
                self._dropped += 1
            return None
        self._seq += 1
        record["seq"] = self._seq
        return (compact_json(record) + "\n").encode("utf-8")

    def _send_loop(self) -> None:
        dead = False
        while True:
            item = self._queue.get()
            if item is _CLOSE:
                return
            if dead:
                continue
            batch = [item]
            if item["kind"] == "run_end":
                # every earlier item has been encoded by now, so the drop
                # counter is final; confess before closing the run
                with self._lock:
                    dropped = self._dropped
                if dropped:
                    batch.insert(
                        0,
                        {
                            "kind": "error",
                            "span_id": self.root_span_id,
                            "name": "ait-client",
                            "payload": {"message": f"client dropped {dropped} events (queue overflow or unencodable payload)"},
                            "parent_span_id": None,
                            "usage": None,
                            "ts_unix_ms": now_ms(),
                        },
                    )
            for entry in batch:
                line = self._encode(entry)
                if line is None and entry["kind"] == "run_end":
                    # the run must still close; fall back to an empty payload
                    line = self._encode({**entry, "payload": {}})
                if line is None:
                    continue
                try:
                    self._sock.sendall(line)  # type: ignore[union-attr]
                except OSError as exc:
                    log.debug("tracing disabled mid-run: %s", exc)
                    dead = True
                    self.connected = False
                    break
