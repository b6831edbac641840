"""Trace ingestion: TCP service and recorded-file replay.

Both paths run the same SessionProcessor over the same raw lines, so a
recorded session replayed into a fresh store yields a byte-identical
trace file and an equal assembled tree.

Protocol violations (sequence gap, wrong run_id, missing or trailing
run_start/run_end) are fatal for the session: the connection is closed,
everything received so far is kept, and the trace is marked aborted.
"""

from __future__ import annotations

import json
import logging
import socket
import threading
from pathlib import Path
from typing import Optional

from .protocol import (
    Handshake,
    UnsupportedVersionError,
    WireError,
    WireEvent,
    decode_event,
    decode_handshake,
    unsupported_version_reply,
)
from .store import DuplicateRunError, RunNotFoundError, TraceStore, iter_trace_lines

log = logging.getLogger("ait.server")


class SessionError(Exception):
    """A session-level protocol violation (the stream itself was valid JSON)."""


class ReplayError(Exception):
    def __init__(self, path: Path, line_no: int, reason: str) -> None:
        super().__init__(f"{path}: line {line_no}: {reason}")
        self.path = path
        self.line_no = line_no
        self.reason = reason


def error_reply(code: str, message: str) -> bytes:
    return (
        json.dumps({"error": code, "message": message}, separators=(",", ":")).encode("utf-8")
        + b"\n"
    )


class SessionProcessor:
    """Line-by-line processing of one session against a store."""

    def __init__(self, store: TraceStore) -> None:
        self.store = store
        self.handshake: Optional[Handshake] = None
        self.completed = False
        self._finished = False
        self._last_seq = 0

    @property
    def run_id(self) -> Optional[str]:
        return self.handshake.run_id if self.handshake else None

    def feed_handshake(self, raw_line: bytes) -> Handshake:
        handshake = decode_handshake(raw_line.strip() + b"\n")
        self.store.begin_session(handshake, raw_line.strip() + b"\n")
        self.handshake = handshake
        return handshake

    def feed_event(self, raw_line: bytes) -> WireEvent:
        if self.handshake is None:
            raise SessionError("event before handshake")
        if self.completed:
            raise SessionError("event after run_end")
        event = decode_event(raw_line.strip() + b"\n")
        if event.run_id != self.handshake.run_id:
            raise SessionError(
                f"event run_id {event.run_id!r} does not match handshake"
                f" {self.handshake.run_id!r}"
            )
        if event.seq != self._last_seq + 1:
            raise SessionError(f"sequence gap: expected {self._last_seq + 1}, got {event.seq}")
        if self._last_seq == 0 and event.kind != "run_start":
            raise SessionError(f"first event must be run_start, got {event.kind!r}")
        if self._last_seq > 0 and event.kind == "run_start":
            raise SessionError("duplicate run_start")
        self._last_seq = event.seq
        self.store.apply_event(event.run_id, event, raw_line.strip() + b"\n")
        if event.kind == "run_end":
            self.completed = True
        return event

    def finish(self) -> None:
        """Close out the session; idempotent.

        A session that never reached run_end is retained as aborted.
        """
        if self._finished or self.handshake is None:
            self._finished = True
            return
        self._finished = True
        try:
            self.store.end_session(self.handshake.run_id)
        except RunNotFoundError:
            pass  # already closed by a store-level abort


class IngestServer:
    """Threaded NDJSON-over-TCP listener bound to the loopback interface."""

    def __init__(self, store: TraceStore, host: str = "127.0.0.1", port: int = 0) -> None:
        self.store = store
        self.host = host
        self._requested_port = port
        self._listener: Optional[socket.socket] = None
        self._accept_thread: Optional[threading.Thread] = None
        self._conn_threads: list[threading.Thread] = []
        self._conns: set[socket.socket] = set()
        self._conn_lock = threading.Lock()
        self._stopping = threading.Event()

    @property
    def port(self) -> int:
        if self._listener is None:
            raise RuntimeError("server not started")
        return self._listener.getsockname()[1]

    @property
    def address(self) -> str:
        return f"{self.host}:{self.port}"

    def start(self) -> None:
        listener = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        listener.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        listener.bind((self.host, self._requested_port))
        listener.listen(32)
        self._listener = listener
        self._accept_thread = threading.Thread(
            target=self._accept_loop, name="ait-ingest-accept", daemon=True
        )
        self._accept_thread.start()

    def stop(self) -> None:
        """Stop accepting, drop live connections, abort their sessions."""
        self._stopping.set()
        if self._listener is not None:
            # close() alone does not interrupt a thread blocked in accept();
            # shutdown() does
            try:
                self._listener.shutdown(socket.SHUT_RDWR)
            except OSError:
                pass
            try:
                self._listener.close()
            except OSError:
                pass
        with self._conn_lock:
            conns = list(self._conns)
        for conn in conns:
            try:
                conn.shutdown(socket.SHUT_RDWR)
            except OSError:
                pass
            try:
                conn.close()
            except OSError:
                pass
        if self._accept_thread is not None:
            self._accept_thread.join(timeout=5)
        for thread in self._conn_threads:
            thread.join(timeout=5)
        self.store.abort_open_sessions()

    def __enter__(self) -> "IngestServer":
        self.start()
        return self

    def __exit__(self, *exc_info: object) -> None:
        self.stop()

    def _accept_loop(self) -> None:
        assert self._listener is not None
        while not self._stopping.is_set():
            try:
                conn, peer = self._listener.accept()
            except OSError:
                return
            with self._conn_lock:
                self._conns.add(conn)
            thread = threading.Thread(
                target=self._handle_conn,
                args=(conn, peer),
                name=f"ait-ingest-{peer[1]}",
                daemon=True,
            )
            self._conn_threads.append(thread)
            thread.start()

    def _handle_conn(self, conn: socket.socket, peer: tuple) -> None:
        processor = SessionProcessor(self.store)
        try:
            with conn, conn.makefile("rb") as reader:
                first = reader.readline()
                if not first.strip():
                    return
                try:
                    processor.feed_handshake(first)
                except UnsupportedVersionError:
                    self._reply(conn, unsupported_version_reply())
                    return
                except DuplicateRunError as exc:
                    self._reply(conn, error_reply("duplicate_run", str(exc)))
                    return
                except WireError as exc:
                    self._reply(conn, error_reply("bad_handshake", str(exc)))
                    return
                for line in reader:
                    if not line.strip():
                        continue
                    try:
                        processor.feed_event(line)
                    except (WireError, SessionError) as exc:
                        log.warning("session %s aborted: %s", processor.run_id, exc)
                        self._reply(conn, error_reply("protocol_error", str(exc)))
                        return
                    if processor.completed:
                        return
        except OSError:
            pass
        finally:
            processor.finish()
            with self._conn_lock:
                self._conns.discard(conn)

    @staticmethod
    def _reply(conn: socket.socket, payload: bytes) -> None:
        try:
            conn.sendall(payload)
        except OSError:
            pass


def replay(path: Path | str, store: TraceStore) -> str:
    """Feed a recorded ``.trace.ndjson`` file through a fresh session.

    Raises ReplayError naming the first offending line; everything before
    it is retained as an aborted session.
    """
    path = Path(path)
    lines = iter_trace_lines(path)
    try:
        _, first = next(lines)
    except StopIteration:
        raise ReplayError(path, 1, "empty trace file") from None
    processor = SessionProcessor(store)
    try:
        processor.feed_handshake(first)
    except WireError as exc:
        raise ReplayError(path, 1, str(exc)) from exc
    try:
        for line_no, line in lines:
            try:
                processor.feed_event(line)
            except (WireError, SessionError) as exc:
                raise ReplayError(path, line_no, str(exc)) from exc
    finally:
        processor.finish()
    run_id = processor.run_id
    assert run_id is not None
    return run_id
