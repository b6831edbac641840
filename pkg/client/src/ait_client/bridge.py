"""Framework callbacks mapped onto wire events.

One bridge instance serves any adapter: node/chain hooks become node
spans, LLM and tool hooks become llm/tool spans with token usage pulled
from the framework's metadata, error callbacks mark the failing span,
and a compiled graph is forwarded once per session. Span identity is
the framework's run identifier; the parent is its parent identifier,
omitted at the top level so the server attaches those spans to the run
root.
"""

from __future__ import annotations

from typing import Any, Optional

from .session import ClientSession, normalize_usage


class CallbackBridge:
    def __init__(self, session: ClientSession) -> None:
        self.session = session
        self._graph_sent = False

    # -- nodes (chains / graph steps) -----------------------------------------

    def on_node_start(
        self, span_id: str, parent_span_id: Optional[str], name: str, inputs: Any
    ) -> None:
        self.session.emit(
            "node_start", span_id, name=name, payload=inputs, parent_span_id=parent_span_id
        )

    def on_node_end(self, span_id: str, outputs: Any) -> None:
        self.session.emit("node_end", span_id, payload=outputs)

    # -- llm calls -------------------------------------------------------------

    def on_llm_start(
        self, span_id: str, parent_span_id: Optional[str], name: str, inputs: Any
    ) -> None:
        self.session.emit(
            "llm_start", span_id, name=name, payload=inputs, parent_span_id=parent_span_id
        )

    def on_llm_end(self, span_id: str, outputs: Any, usage: Any = None) -> None:
        self.session.emit("llm_end", span_id, payload=outputs, usage=normalize_usage(usage))

    # -- tool calls --------------------------------------------------------------

    def on_tool_start(
        self, span_id: str, parent_span_id: Optional[str], name: str, inputs: Any
    ) -> None:
        self.session.emit(
            "tool_start", span_id, name=name, payload=inputs, parent_span_id=parent_span_id
        )

    def on_tool_end(self, span_id: str, outputs: Any) -> None:
        self.session.emit("tool_end", span_id, payload=outputs)

    # -- errors and the graph ------------------------------------------------------

    def on_error(self, span_id: str, error: Any) -> None:
        self.session.emit("error", span_id, payload={"message": str(error)})

    def on_graph(self, payload: dict) -> None:
        # once per session; frameworks may re-announce on every invoke
        if self._graph_sent:
            return
        self._graph_sent = True
        self.session.emit("graph", self.session.root_span_id, payload=payload)
