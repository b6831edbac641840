"""Span-tree assembly from wire events, plus the condensed Pretty view.

Children are kept ordered by the seq carried on their start event, not by
arrival order, so delivery permutations that respect causality (start
before end, start before error) assemble to the same tree. Spans whose
parent start never arrives wait in an orphan buffer and are attached to
the root at run_end with a visible flag.
"""

from __future__ import annotations

import json
from bisect import insort
from dataclasses import dataclass, field
from typing import Any, Iterator, Optional

from .protocol import GraphPayload, SchemaError, TokenUsage, WireEvent

HEADLINE_LIMIT = 120

_KIND_FAMILY = {
    "node": "agent_node",
    "llm": "llm",
    "tool": "tool",
}


@dataclass
class Span:
    span_id: str
    kind: str  # run_root | agent_node | llm | tool
    name: str
    start_ts_unix_ms: int
    start_seq: int
    parent_span_id: Optional[str] = None
    end_ts_unix_ms: Optional[int] = None
    status: str = "running"  # running | ok | error
    input: Any = None
    output: Any = None
    error_message: Optional[str] = None
    own_usage: Optional[TokenUsage] = None
    children: list["Span"] = field(default_factory=list)
    orphan_attached: bool = False

    @property
    def duration_ms(self) -> Optional[int]:
        if self.end_ts_unix_ms is None:
            return None
        return max(self.end_ts_unix_ms - self.start_ts_unix_ms, 0)

    def walk(self) -> Iterator["Span"]:
        yield self
        for child in self.children:
            yield from child.walk()

    def to_json(self) -> dict:
        out: dict = {
            "span_id": self.span_id,
            "parent_span_id": self.parent_span_id,
            "kind": self.kind,
            "name": self.name,
            "status": self.status,
            "start_ts_unix_ms": self.start_ts_unix_ms,
            "end_ts_unix_ms": self.end_ts_unix_ms,
            "duration_ms": self.duration_ms,
            "input": self.input,
            "output": self.output,
            "orphan_attached": self.orphan_attached,
            "usage": aggregate_usage(self).to_json(),
            "children": [c.to_json() for c in self.children],
        }
        if self.error_message is not None:
            out["error_message"] = self.error_message
        if self.own_usage is not None:
            out["own_usage"] = self.own_usage.to_json()
        return out


@dataclass
class RunTrace:
    run_id: str
    framework: str = ""
    root: Optional[Span] = None
    graph: Optional[GraphPayload] = None
    state: str = "open"  # open | completed | aborted
    anomalies: list[str] = field(default_factory=list)
    last_ts_unix_ms: int = 0
    event_count: int = 0

    @property
    def total_usage(self) -> TokenUsage:
        return aggregate_usage(self.root) if self.root else TokenUsage()

    @property
    def duration_ms(self) -> int:
        if self.root is None:
            return 0
        end = self.root.end_ts_unix_ms
        if end is None:
            end = max(self.last_ts_unix_ms, self.root.start_ts_unix_ms)
        return max(end - self.root.start_ts_unix_ms, 0)

    def spans_by_id(self) -> dict[str, Span]:
        if self.root is None:
            return {}
        return {s.span_id: s for s in self.root.walk()}


def aggregate_usage(span: Optional[Span]) -> TokenUsage:
    """Own usage plus the sum over all descendants; zero when none."""
    if span is None:
        return TokenUsage()
    total = span.own_usage or TokenUsage()
    for child in span.children:
        total = total + aggregate_usage(child)
    return total


class TraceAssembler:
    """Applies decoded events to a RunTrace, tolerating causal reordering."""

    def __init__(self, run_id: str, framework: str = ""):
        self.trace = RunTrace(run_id=run_id, framework=framework)
        self._spans: dict[str, Span] = {}
        self._orphans: dict[Optional[str], list[Span]] = {}
        self._dup_count: dict[str, int] = {}
        self._ended: set[str] = set()  # spans whose *_end was consumed

    def _anomaly(self, message: str) -> None:
        self.trace.anomalies.append(message)

    def _insert_child(self, parent: Span, child: Span) -> None:
        insort(parent.children, child, key=lambda s: s.start_seq)

    def _attach_or_buffer(self, span: Span) -> None:
        parent_id = span.parent_span_id
        root = self.trace.root
        if parent_id is None:
            if root is not None:
                self._insert_child(root, span)
            else:
                self._orphans.setdefault(None, []).append(span)
            return
        parent = self._spans.get(parent_id)
        if parent is not None:
            self._insert_child(parent, span)
        else:
            self._orphans.setdefault(parent_id, []).append(span)

    def _flush_orphans_for(self, span: Span) -> None:
        for waiting in sorted(self._orphans.pop(span.span_id, []), key=lambda s: s.start_seq):
            self._insert_child(span, waiting)

    def _start_span(self, event: WireEvent, family: str) -> None:
        span_id = event.span_id
        if span_id in self._spans:
            n = self._dup_count.get(span_id, 1) + 1
            self._dup_count[span_id] = n
            self._anomaly(f"duplicate span_id {span_id!r}; renamed {span_id}#{n}")
            span_id = f"{span_id}#{n}"
        span = Span(
            span_id=span_id,
            kind=family,
            name=event.name,
            start_ts_unix_ms=event.ts_unix_ms,
            start_seq=event.seq,
            parent_span_id=event.parent_span_id,
            input=event.payload,
        )
        self._spans[span_id] = span
        self._attach_or_buffer(span)
        self._flush_orphans_for(span)

    def _close_span(self, event: WireEvent, family: str) -> None:
        base = event.span_id
        target = None
        for candidate_id in [base] + [f"{base}#{n}" for n in range(2, self._dup_count.get(base, 1) + 1)]:
            candidate = self._spans.get(candidate_id)
            if candidate is not None and candidate_id not in self._ended and candidate.kind == family:
                target = candidate
                break
        if target is None:
            self._anomaly(f"{event.kind} without matching start for span {base!r}")
            return
        self._ended.add(target.span_id)
        target.end_ts_unix_ms = event.ts_unix_ms
        target.output = event.payload
        if target.status != "error":
            target.status = "ok"
        if event.usage is not None:
            if family == "llm":
                target.own_usage = event.usage
            else:
                self._anomaly(f"usage on non-llm span {base!r} ignored")

    def apply(self, event: WireEvent) -> None:
        trace = self.trace
        if trace.state != "open":
            self._anomaly(f"event seq={event.seq} after run_end ignored")
            return
        trace.event_count += 1
        trace.last_ts_unix_ms = max(trace.last_ts_unix_ms, event.ts_unix_ms)
        kind = event.kind

        if kind == "run_start":
            if trace.root is not None:
                self._anomaly("duplicate run_start ignored")
                return
            root = Span(
                span_id=event.span_id,
                kind="run_root",
                name=event.name,
                start_ts_unix_ms=event.ts_unix_ms,
                start_seq=event.seq,
                input=event.payload,
            )
            trace.root = root
            self._spans[root.span_id] = root
            for waiting in sorted(self._orphans.pop(None, []), key=lambda s: s.start_seq):
                self._insert_child(root, waiting)
            self._flush_orphans_for(root)
            return

        if kind == "run_end":
            root = trace.root
            if root is None:
                self._anomaly("run_end without run_start")
                trace.state = "aborted"
                return
            root.end_ts_unix_ms = event.ts_unix_ms
            root.output = event.payload
            if root.status != "error":
                root.status = "ok"
            stranded = [s for spans in self._orphans.values() for s in spans]
            self._orphans.clear()
            for span in sorted(stranded, key=lambda s: s.start_seq):
                span.orphan_attached = True
                self._anomaly(
                    f"span {span.span_id!r} attached to root: parent "
                    f"{span.parent_span_id!r} never started"
                )
                self._insert_child(root, span)
            trace.state = "completed"
            return

        if kind == "error":
            target = self._spans.get(event.span_id)
            if target is None:
                target = trace.root
            if target is None:
                self._anomaly(f"error event for unknown span {event.span_id!r} before run_start")
                return
            target.status = "error"
            target.error_message = _error_message(event.payload)
            # framework error callbacks are terminal: an error on a span
            # that never receives *_end also closes it
            if target.end_ts_unix_ms is None:
                target.end_ts_unix_ms = event.ts_unix_ms
            return

        if kind == "graph":
            try:
                trace.graph = GraphPayload.from_payload(event.payload)
            except SchemaError as exc:
                self._anomaly(f"invalid graph payload: {exc}")
            return

        family = _KIND_FAMILY[kind.rsplit("_", 1)[0]]
        if kind.endswith("_start"):
            self._start_span(event, family)
        else:
            self._close_span(event, family)

    def mark_aborted(self) -> None:
        if self.trace.state == "open":
            self.trace.state = "aborted"


def _error_message(payload: Any) -> str:
    if isinstance(payload, dict) and isinstance(payload.get("message"), str):
        return payload["message"]
    if isinstance(payload, str):
        return payload
    return compact_json(payload)


def compact_json(value: Any) -> str:
    return json.dumps(value, separators=(",", ":"), ensure_ascii=False)


# ---------------------------------------------------------------------------
# Pretty view


@dataclass(frozen=True)
class PrettyLine:
    span_id: str
    depth: int
    headline: str
    detail: Optional[str] = None
    duration_ms: Optional[int] = None
    usage: Optional[TokenUsage] = None

    def to_json(self) -> dict:
        return {
            "span_id": self.span_id,
            "depth": self.depth,
            "headline": self.headline,
            "detail": self.detail,
            "duration_ms": self.duration_ms,
            "usage": self.usage.to_json() if self.usage else None,
        }


def _truncate(text: str) -> str:
    if len(text) > HEADLINE_LIMIT:
        return text[: HEADLINE_LIMIT - 1] + "…"
    return text


def _find_key(doc: Any, key: str) -> Any:
    """Depth-first search for the first value under ``key``, document order."""
    if isinstance(doc, dict):
        if key in doc:
            return doc[key]
        for value in doc.values():
            found = _find_key(value, key)
            if found is not None:
                return found
    elif isinstance(doc, list):
        for item in doc:
            found = _find_key(item, key)
            if found is not None:
                return found
    return None


def _tool_names(span: Span) -> list[str]:
    names: list[str] = []
    calls = _find_key(span.output, "tool_calls")
    if isinstance(calls, list):
        for call in calls:
            if isinstance(call, dict) and isinstance(call.get("name"), str):
                names.append(call["name"])
            elif isinstance(call, str):
                names.append(call)
    for child in span.children:
        if child.kind == "tool" and child.name:
            names.append(child.name)
    deduped: list[str] = []
    for name in names:
        if name and name not in deduped:
            deduped.append(name)
    return deduped


def _last_message_text(span: Span) -> Optional[str]:
    messages = _find_key(span.output, "messages")
    if not isinstance(messages, list) or not messages:
        return None
    last = messages[-1]
    if isinstance(last, str):
        return last
    if isinstance(last, dict) and "content" in last:
        content = last["content"]
        return content if isinstance(content, str) else compact_json(content)
    return compact_json(last)


def _headline_and_detail(span: Span) -> tuple[str, Optional[str]]:
    tools = _tool_names(span)
    if tools:
        return _truncate(", ".join(tools)), None
    message = _last_message_text(span)
    if message is not None:
        return _truncate(message), None
    headline = span.name or span.span_id or span.kind
    detail = _truncate(compact_json(span.output)) if span.output is not None else None
    return _truncate(headline), detail


def trace_to_json(trace: RunTrace) -> dict:
    """Full run serialization: metadata, aggregate usage, and the span tree."""
    out: dict = {
        "run_id": trace.run_id,
        "framework": trace.framework,
        "state": trace.state,
        "event_count": trace.event_count,
        "duration_ms": trace.duration_ms,
        "total_usage": trace.total_usage.to_json(),
        "anomalies": list(trace.anomalies),
        "root": trace.root.to_json() if trace.root is not None else None,
    }
    if trace.graph is not None:
        out["graph"] = trace.graph.to_payload()
    return out


def pretty_view(trace: RunTrace) -> list[PrettyLine]:
    """Depth-first pre-order condensed lines; works on partial traces."""
    lines: list[PrettyLine] = []

    def visit(span: Span, depth: int) -> None:
        headline, detail = _headline_and_detail(span)
        usage = aggregate_usage(span)
        lines.append(
            PrettyLine(
                span_id=span.span_id,
                depth=depth,
                headline=headline,
                detail=detail,
                duration_ms=span.duration_ms,
                usage=usage if usage else None,
            )
        )
        for child in span.children:
            visit(child, depth + 1)

    if trace.root is not None:
        visit(trace.root, 0)
    return lines
