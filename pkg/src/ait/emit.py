"""Built-in fake agent for exercising the pipeline end to end.

Reads AIT_DATAPOINT_INPUT, connects to AIT_TRACE_ADDR, and emits one
well-formed session: run_start, an agent node, an optional tool span,
an llm span with fixed usage, run_end.  The root output carries the
transformed input under ``{"messages": [{"content": ...}]}``.
"""

from __future__ import annotations

import argparse
import json
import os
import socket
import sys
import time
import uuid
from typing import Any, Optional

from .protocol import (
    Handshake,
    TokenUsage,
    WireEvent,
    encode_event,
    encode_handshake,
)
from .trace import compact_json

DEFAULT_INPUT: dict[str, Any] = {"messages": [{"content": "hello world"}]}
LLM_USAGE = TokenUsage(prompt_tokens=10, completion_tokens=5, total_tokens=15)


def content_of(doc: Any) -> str:
    """Best-effort text of a row input: messages[0].content, a bare string, or compact JSON."""
    if isinstance(doc, dict):
        messages = doc.get("messages")
        if isinstance(messages, list) and messages and isinstance(messages[0], dict):
            content = messages[0].get("content")
            if isinstance(content, str):
                return content
    if isinstance(doc, str):
        return doc
    return compact_json(doc)


def apply_transform(transform: str, input_doc: Any) -> Any:
    if transform == "upper":
        return content_of(input_doc).upper()
    if transform == "echo":
        return content_of(input_doc)
    if transform.startswith("const:"):
        literal = transform[len("const:"):]
        try:
            return json.loads(literal)
        except json.JSONDecodeError as exc:
            raise ValueError(f"const transform payload is not valid JSON: {exc}") from exc
    raise ValueError(f"unknown transform {transform!r} (expected upper, echo, or const:<json>)")


def build_session(
    run_id: str,
    input_doc: Any,
    transform: str,
    with_tool: Optional[str] = None,
    base_ts: Optional[int] = None,
) -> tuple[Handshake, list[WireEvent]]:
    transformed = apply_transform(transform, input_doc)
    output_doc = {"messages": [{"content": transformed}]}
    ts = int(time.time() * 1000) if base_ts is None else base_ts
    handshake = Handshake(
        run_id=run_id,
        framework="ait-emit",
        client_pid=os.getpid(),
        started_ts_unix_ms=ts,
    )
    events: list[WireEvent] = []

    def emit(kind: str, span_id: str = "root", **kw: Any) -> None:
        nonlocal ts
        events.append(
            WireEvent(
                seq=len(events) + 1,  # seq starts at 1; the handshake is line 0
                run_id=run_id,
                span_id=span_id,
                kind=kind,
                ts_unix_ms=ts,
                **kw,
            )
        )
        ts += 1

    emit("run_start", payload=input_doc)
    emit("node_start", span_id="node-1", name="agent")
    if with_tool is not None:
        emit(
            "tool_start",
            span_id="tool-1",
            parent_span_id="node-1",
            name=with_tool,
            payload={"args": {"query": content_of(input_doc)}},
        )
        emit("tool_end", span_id="tool-1", payload={"result": "ok"})
    emit(
        "llm_start",
        span_id="llm-1",
        parent_span_id="node-1",
        name="fake-llm",
        payload={"prompt": content_of(input_doc)},
    )
    emit("llm_end", span_id="llm-1", payload={"completion": transformed}, usage=LLM_USAGE)
    emit("node_end", span_id="node-1", payload=output_doc)
    emit("run_end", payload=output_doc)
    return handshake, events


def send_session(address: str, handshake: Handshake, events: list[WireEvent]) -> None:
    host, _, port_text = address.rpartition(":")
    if not host or not port_text.isdigit():
        raise ValueError(f"bad trace address {address!r} (expected host:port)")
    with socket.create_connection((host, int(port_text)), timeout=10) as conn:
        conn.sendall(encode_handshake(handshake))
        for event in events:
            conn.sendall(encode_event(event))
        # wait for the server-side close so the session is finalized
        # before this process exits
        conn.shutdown(socket.SHUT_WR)
        while conn.recv(4096):
            pass


def run_emit(
    transform: str,
    with_tool: Optional[str] = None,
    input_doc: Any = None,
    address: Optional[str] = None,
    run_id: Optional[str] = None,
) -> Any:
    """Emit one fake-agent session; returns the root output document."""
    if input_doc is None:
        raw = os.environ.get("AIT_DATAPOINT_INPUT")
        input_doc = json.loads(raw) if raw else DEFAULT_INPUT
    if address is None:
        address = os.environ.get("AIT_TRACE_ADDR")
    if run_id is None:
        run_id = os.environ.get("AIT_RUN_ID") or str(uuid.uuid4())
    handshake, events = build_session(run_id, input_doc, transform, with_tool=with_tool)
    if address:
        send_session(address, handshake, events)
    return events[-1].payload


def main(argv: Optional[list[str]] = None) -> int:
    parser = argparse.ArgumentParser(
        prog="ait emit", description="run the built-in fake agent once"
    )
    parser.add_argument(
        "--transform",
        default="echo",
        help="upper, echo, or const:<json> (default echo)",
    )
    parser.add_argument(
        "--with-tool",
        metavar="NAME",
        default=None,
        help="include a tool span named NAME",
    )
    args = parser.parse_args(argv)
    try:
        output = run_emit(args.transform, with_tool=args.with_tool)
    except (ValueError, json.JSONDecodeError) as exc:
        print(f"emit: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"emit: cannot send trace: {exc}", file=sys.stderr)
        return 1
    print(compact_json(output))
    return 0


if __name__ == "__main__":
    sys.exit(main())
