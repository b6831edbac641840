#!/usr/bin/env python3
"""Regenerate the canonical recorded fixtures under tests/fixtures/.

The schedule session is the two-agent-node narrative: the first agent
node invokes the read_schedule tool, the second answers with the LLM's
last message.  All timestamps are fixed so regeneration is
byte-identical.
"""

from __future__ import annotations

import sys
from pathlib import Path

REPO_ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(REPO_ROOT / "src"))

from ait.protocol import (  # noqa: E402
    Handshake,
    TokenUsage,
    WireEvent,
    encode_event,
    encode_handshake,
)

FIXTURES_DIR = REPO_ROOT / "tests" / "fixtures"

RUN_ID = "schedule-demo"
BASE_TS = 1_755_000_000_000
QUESTION = "What's on my schedule today?"
ANSWER = "You have a 9am standup and a 3pm design review."

GRAPH = {
    "nodes": [
        {"id": "__start__", "label": "__start__"},
        {"id": "agent", "label": "agent"},
        {"id": "tools", "label": "tools"},
        {"id": "__end__", "label": "__end__"},
    ],
    "edges": [
        {"from": "__start__", "to": "agent"},
        {"from": "agent", "to": "tools", "label": "tool_calls"},
        {"from": "tools", "to": "agent"},
        {"from": "agent", "to": "__end__", "label": "end"},
    ],
}

FINAL_MESSAGES = {
    "messages": [
        {"role": "user", "content": QUESTION},
        {"role": "assistant", "content": ANSWER},
    ]
}


def schedule_session() -> tuple[Handshake, list[WireEvent]]:
    handshake = Handshake(
        run_id=RUN_ID, framework="langgraph", client_pid=4242, started_ts_unix_ms=BASE_TS
    )
    events: list[WireEvent] = []

    def emit(kind: str, span_id: str = "root", **kw) -> None:
        events.append(
            WireEvent(
                seq=len(events) + 1,
                run_id=RUN_ID,
                span_id=span_id,
                kind=kind,
                ts_unix_ms=BASE_TS + 5 * len(events),
                **kw,
            )
        )

    emit("run_start", payload={"messages": [{"role": "user", "content": QUESTION}]})
    emit("graph", payload=GRAPH)
    emit("node_start", span_id="agent-1", name="agent")
    emit("llm_start", span_id="llm-1", parent_span_id="agent-1", name="llm",
         payload={"prompt": QUESTION})
    emit("llm_end", span_id="llm-1",
         payload={"tool_calls": [{"name": "read_schedule", "args": {"date": "today"}}]},
         usage=TokenUsage(42, 17, 59))
    emit("tool_start", span_id="tool-1", parent_span_id="agent-1", name="read_schedule",
         payload={"args": {"date": "today"}})
    emit("tool_end", span_id="tool-1",
         payload={"result": ["9am standup", "3pm design review"]})
    emit("node_end", span_id="agent-1",
         payload={"tool_calls": [{"name": "read_schedule"}]})
    emit("node_start", span_id="agent-2", name="agent")
    emit("llm_start", span_id="llm-2", parent_span_id="agent-2", name="llm",
         payload={"prompt": QUESTION, "tool_result": ["9am standup", "3pm design review"]})
    emit("llm_end", span_id="llm-2",
         payload={"messages": [{"role": "assistant", "content": ANSWER}]},
         usage=TokenUsage(58, 24, 82))
    emit("node_end", span_id="agent-2", payload=FINAL_MESSAGES)
    emit("run_end", payload=FINAL_MESSAGES)
    return handshake, events


def write_schedule_fixture() -> Path:
    handshake, events = schedule_session()
    FIXTURES_DIR.mkdir(parents=True, exist_ok=True)
    path = FIXTURES_DIR / "schedule.trace.ndjson"
    with path.open("wb") as fh:
        fh.write(encode_handshake(handshake))
        for event in events:
            fh.write(encode_event(event))
    return path


def main() -> int:
    path = write_schedule_fixture()

    # sanity: the recorded session loads and renders the expected headlines
    from ait.store import load_trace_file
    from ait.trace import pretty_view

    trace = load_trace_file(path)
    assert trace.state == "completed", trace.state
    lines = pretty_view(trace)
    agent_lines = [ln for ln in lines if ln.depth == 1]
    assert agent_lines[0].headline == "read_schedule", agent_lines[0]
    assert agent_lines[1].headline == ANSWER, agent_lines[1]
    assert trace.graph is not None
    print(f"wrote {path} ({len(path.read_bytes())} bytes, {trace.event_count} events)")
    return 0


if __name__ == "__main__":
    sys.exit(main())
