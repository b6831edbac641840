"""A miniature agent framework with the callback surface real ones expose.

Runnables fire globally registered callbacks around invoke, nesting is
tracked per thread so observers see parent identifiers, and a compiled
graph can be announced before execution. It exists so the callback
mapping can be exercised, fuzzed, and demonstrated without any
framework dependency; handler signatures intentionally match
CallbackBridge, so a bridge registers directly as a handler.
"""

from __future__ import annotations

import logging
import threading
import uuid
from dataclasses import dataclass, field
from typing import Any, Callable, Optional

log = logging.getLogger("ait_client.fakeframework")

_handlers: list[Any] = []
_context = threading.local()


def register_callback(handler: Any) -> None:
    """Add a global observer; every runnable invocation reports to it."""
    if handler not in _handlers:
        _handlers.append(handler)


def unregister_callback(handler: Any) -> None:
    if handler in _handlers:
        _handlers.remove(handler)


def clear_callbacks() -> None:
    _handlers.clear()


def _dispatch(hook: str, *args: Any) -> None:
    for handler in list(_handlers):
        fn = getattr(handler, hook, None)
        if fn is None:
            continue
        try:
            fn(*args)
        except Exception as exc:  # observers must never break user code
            log.debug("callback %s raised: %s", hook, exc)


def _stack() -> list[str]:
    if not hasattr(_context, "ids"):
        _context.ids = []
    return _context.ids


def current_parent() -> Optional[str]:
    stack = _stack()
    return stack[-1] if stack else None


class Runnable:
    """Base invocable: fires on_<kind>_start / on_<kind>_end around fn."""

    kind = "node"

    def __init__(self, name: str, fn: Callable[[Any], Any]) -> None:
        self.name = name
        self.fn = fn

    def invoke(self, value: Any) -> Any:
        run_id = str(uuid.uuid4())
        _dispatch(f"on_{self.kind}_start", run_id, current_parent(), self.name, value)
        _stack().append(run_id)
        try:
            result = self.fn(value)
        except Exception as exc:
            _dispatch("on_error", run_id, exc)
            raise
        finally:
            _stack().pop()
        self._dispatch_end(run_id, result)
        return result

    def _dispatch_end(self, run_id: str, result: Any) -> None:
        _dispatch(f"on_{self.kind}_end", run_id, result)


class Node(Runnable):
    kind = "node"


class Tool(Runnable):
    kind = "tool"


class LLM(Runnable):
    """fn returns (output, usage); usage is framework token metadata."""

    kind = "llm"

    def invoke(self, value: Any) -> Any:
        run_id = str(uuid.uuid4())
        _dispatch("on_llm_start", run_id, current_parent(), self.name, value)
        _stack().append(run_id)
        try:
            output, usage = self.fn(value)
        except Exception as exc:
            _dispatch("on_error", run_id, exc)
            raise
        finally:
            _stack().pop()
        _dispatch("on_llm_end", run_id, output, usage)
        return output


@dataclass
class Graph:
    """The framework's compiled execution graph."""

    nodes: list[str]
    edges: list[tuple[str, str, Optional[str]]] = field(default_factory=list)

    def compiled(self) -> dict:
        payload: dict = {"nodes": [{"id": n, "label": n} for n in self.nodes]}
        payload["edges"] = [
            {"from": src, "to": dst, **({"label": label} if label is not None else {})}
            for src, dst, label in self.edges
        ]
        return payload


def announce_graph(graph: Graph) -> None:
    _dispatch("on_graph", graph.compiled())
