"""Trace persistence and live fan-out.

The store owns everything under ``<data_dir>/traces``:

* ``<run_id>.trace.ndjson``: the handshake line followed by every event
  line exactly as received.  Raw bytes are the source of truth; replaying
  a recorded file must reproduce the original trace byte for byte, so the
  store appends received lines verbatim and flushes per line.
* ``index.yaml``: a sidecar summary, one entry per run, sorted by start
  time descending.  It is rewritten on run state changes only; listings
  merge live counters for still-open runs from memory.

All mutation happens under one writer lock, which also serializes
notification publishes so every subscriber observes the same order.
"""

from __future__ import annotations

import queue
import threading
from pathlib import Path
from typing import IO, Any, Callable, Iterator

from .protocol import Handshake, WireError, WireEvent, decode_event, decode_handshake
from .trace import RunTrace, TraceAssembler
from .yamlio import atomic_write, dump_yaml, load_yaml

TRACE_SUFFIX = ".trace.ndjson"
DEFAULT_BACKLOG = 10_000


class StoreError(Exception):
    pass


class RunNotFoundError(StoreError):
    def __init__(self, run_id: str) -> None:
        super().__init__(f"no trace for run {run_id!r}")
        self.run_id = run_id


class DuplicateRunError(StoreError):
    def __init__(self, run_id: str) -> None:
        super().__init__(f"run {run_id!r} already exists")
        self.run_id = run_id


class LoadError(StoreError):
    """A persisted trace file failed to parse; names the offending line."""

    def __init__(self, path: Path, line_no: int, reason: str) -> None:
        super().__init__(f"{path}: line {line_no}: {reason}")
        self.path = path
        self.line_no = line_no
        self.reason = reason


class Subscription:
    """One consumer's bounded queue of notifications.

    If the consumer falls more than ``backlog`` messages behind it is
    dropped: unsubscribed from the hub with ``dropped`` set, so a
    transport loop can close the connection instead of stalling ingest.
    """

    def __init__(self, backlog: int, run_filter: str | None = None) -> None:
        self._queue: queue.Queue[dict[str, Any]] = queue.Queue(maxsize=backlog)
        self.run_filter = run_filter
        self.dropped = False
        self.closed = False

    def _offer(self, message: dict[str, Any]) -> bool:
        try:
            self._queue.put_nowait(message)
            return True
        except queue.Full:
            self.dropped = True
            return False

    def get(self, timeout: float | None = None) -> dict[str, Any]:
        """Next message; raises queue.Empty on timeout."""
        return self._queue.get(timeout=timeout)

    def drain(self) -> list[dict[str, Any]]:
        out: list[dict[str, Any]] = []
        while True:
            try:
                out.append(self._queue.get_nowait())
            except queue.Empty:
                return out


class LiveHub:
    """Fan-out of store notifications to any number of subscribers."""

    def __init__(self, backlog: int = DEFAULT_BACKLOG) -> None:
        self._backlog = backlog
        self._subs: list[Subscription] = []
        self._lock = threading.Lock()

    def subscribe(
        self,
        run_filter: str | None = None,
        snapshot: Callable[[], dict[str, Any]] | None = None,
        backlog: int | None = None,
    ) -> Subscription:
        sub = Subscription(backlog or self._backlog, run_filter)
        with self._lock:
            # the snapshot is built and enqueued under the hub lock, so no
            # publish can slip between the snapshot and the live stream
            if snapshot is not None:
                sub._offer(snapshot())
            self._subs.append(sub)
        return sub

    def unsubscribe(self, sub: Subscription) -> None:
        with self._lock:
            sub.closed = True
            if sub in self._subs:
                self._subs.remove(sub)

    def publish(self, message: dict[str, Any]) -> None:
        run_id = message.get("run_id")
        with self._lock:
            for sub in list(self._subs):
                if sub.run_filter is not None and run_id != sub.run_filter:
                    continue
                if not sub._offer(message):
                    sub.closed = True
                    self._subs.remove(sub)

    @property
    def subscriber_count(self) -> int:
        with self._lock:
            return len(self._subs)


class _Session:
    def __init__(self, handshake: Handshake, assembler: TraceAssembler, fh: IO[bytes]) -> None:
        self.handshake = handshake
        self.assembler = assembler
        self.fh = fh


class TraceStore:
    """All trace state for one data directory."""

    def __init__(self, data_dir: Path | str, hub: LiveHub | None = None) -> None:
        self.data_dir = Path(data_dir)
        self.traces_dir = self.data_dir / "traces"
        self.hub = hub or LiveHub()
        self._lock = threading.RLock()
        self._live: dict[str, _Session] = {}

    # -- paths ------------------------------------------------------------

    def trace_path(self, run_id: str) -> Path:
        return self.traces_dir / f"{run_id}{TRACE_SUFFIX}"

    @property
    def index_path(self) -> Path:
        return self.traces_dir / "index.yaml"

    # -- write path (one session at a time per run_id) ---------------------

    def begin_session(self, handshake: Handshake, raw_line: bytes) -> str:
        with self._lock:
            run_id = handshake.run_id
            path = self.trace_path(run_id)
            if run_id in self._live or path.exists():
                raise DuplicateRunError(run_id)
            self.traces_dir.mkdir(parents=True, exist_ok=True)
            fh = open(path, "wb")
            fh.write(raw_line)
            fh.flush()
            assembler = TraceAssembler(run_id, handshake.framework)
            self._live[run_id] = _Session(handshake, assembler, fh)
            self._rewrite_index()
            self.hub.publish(
                {
                    "type": "run_started",
                    "run_id": run_id,
                    "framework": handshake.framework,
                    "started_ts_unix_ms": handshake.started_ts_unix_ms,
                }
            )
            return run_id

    def apply_event(self, run_id: str, event: WireEvent, raw_line: bytes) -> None:
        with self._lock:
            session = self._live.get(run_id)
            if session is None:
                raise RunNotFoundError(run_id)
            session.fh.write(raw_line)
            session.fh.flush()
            session.assembler.apply(event)
            self.hub.publish(
                {
                    "type": "event",
                    "run_id": run_id,
                    "seq": event.seq,
                    "kind": event.kind,
                    "span_id": event.span_id,
                    "name": event.name,
                }
            )

    def end_session(self, run_id: str) -> RunTrace:
        with self._lock:
            session = self._live.pop(run_id, None)
            if session is None:
                raise RunNotFoundError(run_id)
            session.fh.close()
            # no run_end means the session did not complete, whatever the
            # caller believes, so an open assembly always closes as aborted
            session.assembler.mark_aborted()
            trace = session.assembler.trace
            self._rewrite_index(extra=trace)
            self.hub.publish(
                {"type": "run_finished", "run_id": run_id, "state": trace.state}
            )
            return trace

    def abort_open_sessions(self) -> list[str]:
        with self._lock:
            open_ids = list(self._live)
            for run_id in open_ids:
                self.end_session(run_id)
            return open_ids

    @property
    def open_run_ids(self) -> list[str]:
        with self._lock:
            return list(self._live)

    # -- read path ----------------------------------------------------------

    def get(self, run_id: str) -> RunTrace:
        """Current trace: the live assembly if the run is open, else disk."""
        with self._lock:
            session = self._live.get(run_id)
            if session is not None:
                return session.assembler.trace
        return self.load(run_id)

    def load(self, run_id: str) -> RunTrace:
        """Rebuild a trace from its persisted file only."""
        path = self.trace_path(run_id)
        if not path.is_file():
            raise RunNotFoundError(run_id)
        return load_trace_file(path)

    def list_runs(self) -> list[dict[str, Any]]:
        entries = []
        try:
            raw = load_yaml(self.index_path)
        except FileNotFoundError:
            raw = None
        if isinstance(raw, dict) and isinstance(raw.get("runs"), list):
            entries = [e for e in raw["runs"] if isinstance(e, dict)]
        with self._lock:
            live = {rid: s.assembler.trace for rid, s in self._live.items()}
        for entry in entries:
            trace = live.get(entry.get("run_id"))
            if trace is not None:
                entry.update(_index_entry(trace))
        return entries

    def subscribe(self, run_filter: str | None = None, backlog: int | None = None) -> Subscription:
        def snapshot() -> dict[str, Any]:
            return {"type": "snapshot", "runs": self.list_runs()}

        return self.hub.subscribe(run_filter=run_filter, snapshot=snapshot, backlog=backlog)

    # -- index ---------------------------------------------------------------

    def _rewrite_index(self, extra: RunTrace | None = None) -> None:
        entries: dict[str, dict[str, Any]] = {}
        for path in sorted(self.traces_dir.glob(f"*{TRACE_SUFFIX}")):
            run_id = path.name[: -len(TRACE_SUFFIX)]
            entries[run_id] = {"run_id": run_id}
        # stat-only scan above names the files; summaries come from memory
        # for live runs and from the previous index for closed ones, so a
        # rewrite never re-parses every trace file
        try:
            previous = load_yaml(self.index_path)
        except FileNotFoundError:
            previous = None
        if isinstance(previous, dict) and isinstance(previous.get("runs"), list):
            for old in previous["runs"]:
                if isinstance(old, dict) and old.get("run_id") in entries:
                    entries[old["run_id"]] = old
        with self._lock:
            for run_id, session in self._live.items():
                if run_id in entries:
                    entries[run_id] = _index_entry(session.assembler.trace)
            if extra is not None and extra.run_id in entries:
                entries[extra.run_id] = _index_entry(extra)
        for run_id, entry in entries.items():
            if set(entry) == {"run_id"}:  # file present but never summarized
                try:
                    entries[run_id] = _index_entry(load_trace_file(self.trace_path(run_id)))
                except (LoadError, OSError):
                    entries[run_id] = {"run_id": run_id, "state": "unreadable"}
        ordered = sorted(
            entries.values(),
            key=lambda e: (-(e.get("started_ts_unix_ms") or 0), e.get("run_id", "")),
        )
        atomic_write(self.index_path, dump_yaml({"runs": ordered}))

    def rebuild_index(self) -> None:
        """Regenerate index.yaml from the trace files alone."""
        entries = []
        for path in sorted(self.traces_dir.glob(f"*{TRACE_SUFFIX}")):
            run_id = path.name[: -len(TRACE_SUFFIX)]
            try:
                entries.append(_index_entry(load_trace_file(path)))
            except (LoadError, OSError):
                entries.append({"run_id": run_id, "state": "unreadable"})
        entries.sort(key=lambda e: (-(e.get("started_ts_unix_ms") or 0), e.get("run_id", "")))
        atomic_write(self.index_path, dump_yaml({"runs": entries}))


def _index_entry(trace: RunTrace) -> dict[str, Any]:
    usage = trace.total_usage
    root = trace.root
    entry: dict[str, Any] = {
        "run_id": trace.run_id,
        "framework": trace.framework,
        "state": trace.state,
        "started_ts_unix_ms": root.start_ts_unix_ms if root else None,
        "event_count": trace.event_count,
        "span_count": sum(1 for _ in root.walk()) - 1 if root else 0,
        "total_tokens": usage.total_tokens,
    }
    if root is not None and root.end_ts_unix_ms is not None:
        entry["ended_ts_unix_ms"] = root.end_ts_unix_ms
    entry["duration_ms"] = trace.duration_ms
    return entry


def iter_trace_lines(path: Path) -> Iterator[tuple[int, bytes]]:
    """Non-empty (line_no, line) pairs from a trace file, 1-based."""
    with open(path, "rb") as fh:
        for line_no, line in enumerate(fh, start=1):
            stripped = line.strip()
            if stripped:
                yield line_no, stripped


def load_trace_file(path: Path) -> RunTrace:
    """Parse and assemble one ``.trace.ndjson`` file.

    The file alone cannot distinguish a crash from a live writer, so a
    trace without run_end loads as ``aborted``.
    """
    lines = iter_trace_lines(path)
    try:
        _, first = next(lines)
    except StopIteration:
        raise LoadError(path, 1, "empty trace file") from None
    try:
        handshake = decode_handshake(first)
    except WireError as exc:
        raise LoadError(path, 1, str(exc)) from exc
    assembler = TraceAssembler(handshake.run_id, handshake.framework)
    expected_seq = 1
    completed = False
    for line_no, line in lines:
        try:
            event = decode_event(line)
        except WireError as exc:
            raise LoadError(path, line_no, str(exc)) from exc
        if event.run_id != handshake.run_id:
            raise LoadError(
                path,
                line_no,
                f"event run_id {event.run_id!r} does not match handshake {handshake.run_id!r}",
            )
        if event.seq != expected_seq:
            raise LoadError(
                path, line_no, f"expected seq {expected_seq}, got {event.seq}"
            )
        expected_seq += 1
        assembler.apply(event)
        if event.kind == "run_end":
            completed = True
    if not completed:
        assembler.mark_aborted()
    return assembler.trace
