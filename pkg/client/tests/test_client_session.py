"""Session-layer behavior: wire shape, ordering, and failure tolerance."""

from __future__ import annotations

import socket
import threading
import uuid

import pytest

from ait_client.session import ClientSession, compact_json, normalize_usage

from harness import CaptureServer

CANONICAL_ORDER = ["seq", "run_id", "span_id", "parent_span_id", "kind", "name", "ts_unix_ms", "payload", "usage"]


def test_inert_without_address(monkeypatch: pytest.MonkeyPatch) -> None:
    monkeypatch.delenv("AIT_TRACE_ADDR", raising=False)
    session = ClientSession()
    assert session.start() is False
    assert session.connected is False
    # every later call must be a harmless no-op
    session.run_start({"x": 1})
    session.emit("node_start", span_id="s1", name="n")
    session.error("nope")
    session.run_end({"status": "ok"})
    session.close()


def test_inert_when_unreachable() -> None:
    probe = socket.socket()
    probe.bind(("127.0.0.1", 0))
    port = probe.getsockname()[1]
    probe.close()
    session = ClientSession(address=f"127.0.0.1:{port}")
    assert session.start() is False
    session.run_start()
    session.run_end()
    session.close()


def test_handshake_and_field_order() -> None:
    with CaptureServer() as capture:
        session = ClientSession(address=capture.address, run_id="run-wire", framework="toy")
        assert session.start() is True
        session.run_start({"q": "hi"})
        session.emit("node_start", span_id="s1", name="agent", payload={"q": "hi"})
        session.emit(
            "llm_end",
            span_id="s2",
            name="m",
            parent_span_id="s1",
            payload={"text": "yo"},
            usage={"prompt_tokens": 2, "completion_tokens": 1},
        )
        session.emit("node_end", span_id="s1", payload={})
        session.run_end({"status": "ok"})
        session.close()

    hello = capture.hello
    assert hello["protocol_version"] == 1
    assert hello["run_id"] == "run-wire"
    assert hello["framework"] == "toy"
    assert isinstance(hello["client_pid"], int)
    assert isinstance(hello["started_ts_unix_ms"], int)

    events = capture.events
    assert [e["seq"] for e in events] == list(range(1, len(events) + 1))
    assert [e["kind"] for e in events] == ["run_start", "node_start", "llm_end", "node_end", "run_end"]
    assert all(e["run_id"] == "run-wire" for e in events)
    # optional fields are omitted, present ones follow the canonical order
    for event in events:
        keys = list(event.keys())
        assert keys == [k for k in CANONICAL_ORDER if k in keys]
    assert "parent_span_id" not in events[1]
    assert events[2]["parent_span_id"] == "s1"
    assert events[2]["usage"] == {"prompt_tokens": 2, "completion_tokens": 1, "total_tokens": 3}
    assert "usage" not in events[1]


def test_live_session_accepted(server) -> None:
    run_id = f"live-{uuid.uuid4()}"
    session = ClientSession(address=server.addr, run_id=run_id, framework="toy")
    assert session.start() is True
    session.run_start({"messages": [{"content": "hello"}]})
    session.emit("node_start", span_id="s1", name="agent", payload={})
    session.emit("node_end", span_id="s1", payload={"done": True})
    session.run_end({"messages": [{"content": "bye"}]})
    session.close()

    doc = server.wait_run(run_id)
    assert doc["state"] == "completed"
    assert doc["anomalies"] == []
    assert doc["event_count"] == 4
    assert doc["root"]["output"] == {"messages": [{"content": "bye"}]}


def test_threaded_emitters_keep_seq_contiguous() -> None:
    with CaptureServer() as capture:
        session = ClientSession(address=capture.address, run_id="run-threads", buffer_limit=5000)
        assert session.start() is True
        session.run_start()

        def worker(tag: int) -> None:
            for i in range(25):
                span = f"t{tag}-s{i}"
                session.emit("node_start", span_id=span, name=f"n{tag}")
                session.emit("node_end", span_id=span)

        threads = [threading.Thread(target=worker, args=(t,)) for t in range(8)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        session.run_end()
        session.close()

    events = capture.events
    assert [e["seq"] for e in events] == list(range(1, len(events) + 1))
    assert len(events) == 2 + 8 * 25 * 2
    assert events[0]["kind"] == "run_start"
    assert events[-1]["kind"] == "run_end"


def test_overflow_drops_are_reported_not_fatal() -> None:
    # a sink that refuses to read for a while forces queue overflow
    with CaptureServer(read_delay_s=0.8) as capture:
        session = ClientSession(address=capture.address, run_id="run-flood", buffer_limit=5)
        assert session.start() is True
        session.run_start()
        blob = "x" * 4096
        for i in range(200):
            session.emit("node_start", span_id=f"s{i}", name=f"n{i}", payload={"blob": blob})
        session.run_end({"status": "ok"})
        session.close()

    events = capture.events
    assert [e["seq"] for e in events] == list(range(1, len(events) + 1))
    assert events[0]["kind"] == "run_start"
    assert events[-1]["kind"] == "run_end"
    assert len(events) < 202  # something was actually dropped
    warnings = [e for e in events if e["kind"] == "error"]
    assert len(warnings) == 1
    assert "dropped" in warnings[0]["payload"]["message"]


def test_unencodable_payload_dropped_without_seq_gap() -> None:
    with CaptureServer() as capture:
        session = ClientSession(address=capture.address, run_id="run-badjson")
        assert session.start() is True
        session.run_start()
        session.emit("node_start", span_id="s1", name="bad", payload={"obj": object()})
        session.emit("node_start", span_id="s2", name="good", payload={})
        session.run_end()
        session.close()

    events = capture.events
    assert [e["seq"] for e in events] == list(range(1, len(events) + 1))
    names = [e.get("name") for e in events if e["kind"] == "node_start"]
    assert names == ["good"]
    warnings = [e for e in events if e["kind"] == "error"]
    assert len(warnings) == 1 and "dropped" in warnings[0]["payload"]["message"]


def test_nothing_sent_after_run_end() -> None:
    with CaptureServer() as capture:
        session = ClientSession(address=capture.address, run_id="run-after")
        assert session.start() is True
        session.run_start()
        session.run_end({"status": "ok"})
        session.run_end({"status": "again"})  # idempotent
        session.emit("node_start", span_id="late", name="late")
        session.close()

    events = capture.events
    assert [e["kind"] for e in events] == ["run_start", "run_end"]
    assert events[-1]["payload"] == {"status": "ok"}


def test_usage_normalization() -> None:
    assert normalize_usage({"prompt_tokens": 4, "completion_tokens": 2}) == {
        "prompt_tokens": 4,
        "completion_tokens": 2,
        "total_tokens": 6,
    }
    # a stale total is recomputed from the parts
    assert normalize_usage({"prompt_tokens": 4, "completion_tokens": 2, "total_tokens": 99})["total_tokens"] == 6
    assert normalize_usage(None) is None
    assert normalize_usage("lots") is None
    assert normalize_usage({"prompt_tokens": -1, "completion_tokens": 2}) is None
    assert normalize_usage({"prompt_tokens": "4", "completion_tokens": 2}) is None


def test_compact_json_is_single_line_and_strict() -> None:
    doc = {"a": [1, 2], "b": {"c": "déjà"}}
    text = compact_json(doc)
    assert "\n" not in text and ": " not in text and ", " not in text
    assert "déjà" in text  # not ascii-escaped
    with pytest.raises(ValueError):
        compact_json({"x": float("nan")})
