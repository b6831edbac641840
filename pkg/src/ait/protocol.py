"""Versioned NDJSON wire codec for the client->server trace stream.

One JSON object per line, UTF-8, newline-terminated. The first line of a
connection is a handshake wrapped as ``{"hello": {...}}``; every following
line is one event. A recorded session file (``*.trace.ndjson``) is exactly
these bytes persisted. See docs/protocol.md for the byte-level contract.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any, Optional

PROTOCOL_VERSION = 1
SUPPORTED_VERSIONS = (1,)

EVENT_KINDS = (
    "run_start",
    "run_end",
    "node_start",
    "node_end",
    "llm_start",
    "llm_end",
    "tool_start",
    "tool_end",
    "error",
    "graph",
)

# Canonical field order; optionals are omitted when absent so every event
# has exactly one encoding.
_EVENT_FIELDS = (
    "seq",
    "run_id",
    "span_id",
    "parent_span_id",
    "kind",
    "name",
    "ts_unix_ms",
    "payload",
    "usage",
)
_HANDSHAKE_FIELDS = (
    "protocol_version",
    "run_id",
    "framework",
    "client_pid",
    "started_ts_unix_ms",
)

_JSON_OPTS = {"separators": (",", ":"), "ensure_ascii": False, "allow_nan": False}


class WireError(Exception):
    """Base for protocol codec failures."""


class EncodeError(WireError):
    def __init__(self, field_name: str, detail: str):
        super().__init__(f"cannot encode field {field_name!r}: {detail}")
        self.field = field_name


class ParseError(WireError):
    """Line is not valid JSON. ``offset`` is the byte offset of the failure."""

    def __init__(self, offset: int, detail: str):
        super().__init__(f"malformed JSON at offset {offset}: {detail}")
        self.offset = offset


class SchemaError(WireError):
    """Line is JSON but violates the event/handshake schema."""

    def __init__(self, field_name: str, detail: str):
        super().__init__(f"schema error in field {field_name!r}: {detail}")
        self.field = field_name


class UnsupportedVersionError(WireError):
    def __init__(self, version: Any):
        super().__init__(
            f"unsupported protocol version {version!r}; supported: {list(SUPPORTED_VERSIONS)}"
        )
        self.version = version


@dataclass(frozen=True)
class TokenUsage:
    prompt_tokens: int = 0
    completion_tokens: int = 0
    total_tokens: int = 0

    def __post_init__(self):
        if self.total_tokens != self.prompt_tokens + self.completion_tokens:
            raise SchemaError("usage", "total_tokens must equal prompt + completion")

    def __add__(self, other: "TokenUsage") -> "TokenUsage":
        return TokenUsage(
            self.prompt_tokens + other.prompt_tokens,
            self.completion_tokens + other.completion_tokens,
            self.total_tokens + other.total_tokens,
        )

    def __bool__(self) -> bool:
        return self.total_tokens > 0 or self.prompt_tokens > 0 or self.completion_tokens > 0

    def to_json(self) -> dict:
        return {
            "prompt_tokens": self.prompt_tokens,
            "completion_tokens": self.completion_tokens,
            "total_tokens": self.total_tokens,
        }


@dataclass
class WireEvent:
    seq: int
    run_id: str
    span_id: str
    kind: str
    name: str = ""
    ts_unix_ms: int = 0
    payload: Any = field(default_factory=dict)
    parent_span_id: Optional[str] = None
    usage: Optional[TokenUsage] = None


@dataclass(frozen=True)
class Handshake:
    run_id: str
    framework: str = ""
    client_pid: int = 0
    started_ts_unix_ms: int = 0
    protocol_version: int = PROTOCOL_VERSION


@dataclass(frozen=True)
class GraphNode:
    id: str
    label: str


@dataclass(frozen=True)
class GraphEdge:
    src: str
    dst: str
    label: Optional[str] = None


@dataclass(frozen=True)
class GraphPayload:
    nodes: tuple[GraphNode, ...]
    edges: tuple[GraphEdge, ...]

    @classmethod
    def from_payload(cls, obj: Any) -> "GraphPayload":
        if not isinstance(obj, dict):
            raise SchemaError("payload", "graph payload must be an object")
        nodes = []
        seen = set()
        for i, n in enumerate(_require(obj, "nodes", list, where="graph")):
            if not isinstance(n, dict) or not isinstance(n.get("id"), str):
                raise SchemaError("nodes", f"node {i} needs a string 'id'")
            if n["id"] in seen:
                raise SchemaError("nodes", f"duplicate node id {n['id']!r}")
            seen.add(n["id"])
            nodes.append(GraphNode(n["id"], str(n.get("label", n["id"]))))
        edges = []
        for i, e in enumerate(_require(obj, "edges", list, where="graph")):
            if not isinstance(e, dict):
                raise SchemaError("edges", f"edge {i} must be an object")
            src, dst = e.get("from"), e.get("to")
            if src not in seen or dst not in seen:
                raise SchemaError("edges", f"edge {i} references undeclared node")
            label = e.get("label")
            if label is not None and not isinstance(label, str):
                raise SchemaError("edges", f"edge {i} label must be a string")
            edges.append(GraphEdge(src, dst, label))
        return cls(tuple(nodes), tuple(edges))

    def to_payload(self) -> dict:
        out: dict = {"nodes": [{"id": n.id, "label": n.label} for n in self.nodes]}
        out["edges"] = [
            {"from": e.src, "to": e.dst, **({"label": e.label} if e.label is not None else {})}
            for e in self.edges
        ]
        return out


def _require(obj: dict, key: str, typ, where: str = "event"):
    if key not in obj:
        raise SchemaError(key, f"missing required {where} field")
    val = obj[key]
    if typ is int:
        if isinstance(val, bool) or not isinstance(val, int):
            raise SchemaError(key, f"expected integer, got {type(val).__name__}")
    elif not isinstance(val, typ):
        raise SchemaError(key, f"expected {typ.__name__}, got {type(val).__name__}")
    return val


def _dumps_line(record: dict) -> bytes:
    try:
        return (json.dumps(record, **_JSON_OPTS) + "\n").encode("utf-8")
    except (TypeError, ValueError):
        for name, value in record.items():
            try:
                json.dumps(value, **_JSON_OPTS)
            except (TypeError, ValueError) as exc:
                raise EncodeError(name, str(exc)) from exc
        raise  # unreachable: some field must have failed


def encode_event(event: WireEvent) -> bytes:
    """Serialize one event as a newline-terminated UTF-8 JSON line."""
    record: dict = {}
    for name in _EVENT_FIELDS:
        value = getattr(event, name)
        if value is None and name in ("parent_span_id", "usage"):
            continue
        if name == "usage":
            value = value.to_json()
        record[name] = value
    return _dumps_line(record)


def _parse_line(line: bytes) -> dict:
    if isinstance(line, str):
        line = line.encode("utf-8")
    try:
        text = line.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise ParseError(exc.start, "invalid UTF-8") from exc
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        offset = len(text[: exc.pos].encode("utf-8"))
        raise ParseError(offset, exc.msg) from exc
    if not isinstance(obj, dict):
        raise SchemaError("", "line must be a JSON object")
    return obj


def _usage_from_obj(obj: Any) -> TokenUsage:
    if not isinstance(obj, dict):
        raise SchemaError("usage", "usage must be an object")
    return TokenUsage(
        _require(obj, "prompt_tokens", int, where="usage"),
        _require(obj, "completion_tokens", int, where="usage"),
        _require(obj, "total_tokens", int, where="usage"),
    )


def decode_event(line: bytes) -> WireEvent:
    """Parse one line into a WireEvent. Unknown extra fields are ignored."""
    obj = _parse_line(line)
    if "hello" in obj:
        raise SchemaError("hello", "handshake line where an event was expected")
    seq = _require(obj, "seq", int)
    if seq < 1:
        raise SchemaError("seq", "must be >= 1")
    run_id = _require(obj, "run_id", str)
    span_id = _require(obj, "span_id", str)
    kind = _require(obj, "kind", str)
    if kind not in EVENT_KINDS:
        raise SchemaError("kind", f"unknown kind {kind!r}")
    name = _require(obj, "name", str)
    ts = _require(obj, "ts_unix_ms", int)
    if ts < 0:
        raise SchemaError("ts_unix_ms", "must be >= 0")
    if "payload" not in obj:
        raise SchemaError("payload", "missing required event field")
    parent = obj.get("parent_span_id")
    if parent is not None and not isinstance(parent, str):
        raise SchemaError("parent_span_id", "must be a string when present")
    usage = None
    if obj.get("usage") is not None:
        usage = _usage_from_obj(obj["usage"])
    return WireEvent(
        seq=seq,
        run_id=run_id,
        span_id=span_id,
        kind=kind,
        name=name,
        ts_unix_ms=ts,
        payload=obj["payload"],
        parent_span_id=parent,
        usage=usage,
    )


def encode_handshake(h: Handshake) -> bytes:
    record = {name: getattr(h, name) for name in _HANDSHAKE_FIELDS}
    return _dumps_line({"hello": record})


def decode_handshake(line: bytes) -> Handshake:
    obj = _parse_line(line)
    if "hello" not in obj:
        raise SchemaError("hello", "first line must be a handshake")
    body = obj["hello"]
    if not isinstance(body, dict):
        raise SchemaError("hello", "handshake body must be an object")
    version = _require(body, "protocol_version", int, where="handshake")
    if version not in SUPPORTED_VERSIONS:
        raise UnsupportedVersionError(version)
    return Handshake(
        run_id=_require(body, "run_id", str, where="handshake"),
        framework=_require(body, "framework", str, where="handshake"),
        client_pid=_require(body, "client_pid", int, where="handshake"),
        started_ts_unix_ms=_require(body, "started_ts_unix_ms", int, where="handshake"),
        protocol_version=version,
    )


def unsupported_version_reply() -> bytes:
    """One-line JSON error the server sends before closing on a bad version."""
    return _dumps_line({"error": "unsupported_version", "supported": list(SUPPORTED_VERSIONS)})
