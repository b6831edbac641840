"""LangChain adapter: a callback handler forwarding to the bridge.

Registration goes through langchain_core's configure-hook registry, the
same mechanism its own tracers use, so the handler reaches every
Runnable invocation without touching user code. Everything here is
optional: with langchain_core absent, register() reports False and
nothing else happens.
"""

from __future__ import annotations

import logging
from typing import Any, Optional

from .bridge import CallbackBridge

log = logging.getLogger("ait_client.langchain")

try:
    from langchain_core.callbacks.base import BaseCallbackHandler  # type: ignore
except ImportError:
    BaseCallbackHandler = None  # type: ignore[assignment]


def jsonable(value: Any) -> Any:
    """Best-effort conversion of framework objects to JSON-safe values."""
    if value is None or isinstance(value, (bool, int, float, str)):
        return value
    if isinstance(value, (list, tuple)):
        return [jsonable(v) for v in value]
    if isinstance(value, dict):
        return {str(k): jsonable(v) for k, v in value.items()}
    return str(value)


def _ids(run_id: Any, parent_run_id: Any) -> tuple[str, Optional[str]]:
    return str(run_id), str(parent_run_id) if parent_run_id is not None else None


def _name_of(serialized: Any, kwargs: dict, fallback: str) -> str:
    if isinstance(serialized, dict):
        name = serialized.get("name")
        if isinstance(name, str) and name:
            return name
    name = kwargs.get("name")
    return name if isinstance(name, str) and name else fallback


if BaseCallbackHandler is not None:

    class LangChainHandler(BaseCallbackHandler):  # type: ignore[misc]
        """Maps LangChain callbacks onto the bridge's span events."""

        run_inline = True
        raise_error = False

        def __init__(self, bridge: CallbackBridge) -> None:
            self._bridge = bridge

        # chains and graph nodes
        def on_chain_start(self, serialized: Any, inputs: Any, *, run_id: Any, parent_run_id: Any = None, **kwargs: Any) -> None:
            span, parent = _ids(run_id, parent_run_id)
            self._bridge.on_node_start(span, parent, _name_of(serialized, kwargs, "chain"), jsonable(inputs))

        def on_chain_end(self, outputs: Any, *, run_id: Any, **kwargs: Any) -> None:
            self._bridge.on_node_end(str(run_id), jsonable(outputs))

        def on_chain_error(self, error: BaseException, *, run_id: Any, **kwargs: Any) -> None:
            self._bridge.on_error(str(run_id), error)

        # llm calls, both prompt and chat shaped
        def on_llm_start(self, serialized: Any, prompts: Any, *, run_id: Any, parent_run_id: Any = None, **kwargs: Any) -> None:
            span, parent = _ids(run_id, parent_run_id)
            self._bridge.on_llm_start(span, parent, _name_of(serialized, kwargs, "llm"), {"prompts": jsonable(prompts)})

        def on_chat_model_start(self, serialized: Any, messages: Any, *, run_id: Any, parent_run_id: Any = None, **kwargs: Any) -> None:
            span, parent = _ids(run_id, parent_run_id)
            self._bridge.on_llm_start(span, parent, _name_of(serialized, kwargs, "llm"), {"messages": jsonable(messages)})

        def on_llm_end(self, response: Any, *, run_id: Any, **kwargs: Any) -> None:
            llm_output = getattr(response, "llm_output", None) or {}
            usage = llm_output.get("token_usage") if isinstance(llm_output, dict) else None
            self._bridge.on_llm_end(str(run_id), jsonable(getattr(response, "generations", response)), usage)

        def on_llm_error(self, error: BaseException, *, run_id: Any, **kwargs: Any) -> None:
            self._bridge.on_error(str(run_id), error)

        # tools
        def on_tool_start(self, serialized: Any, input_str: Any, *, run_id: Any, parent_run_id: Any = None, **kwargs: Any) -> None:
            span, parent = _ids(run_id, parent_run_id)
            self._bridge.on_tool_start(span, parent, _name_of(serialized, kwargs, "tool"), jsonable(input_str))

        def on_tool_end(self, output: Any, *, run_id: Any, **kwargs: Any) -> None:
            self._bridge.on_tool_end(str(run_id), jsonable(output))

        def on_tool_error(self, error: BaseException, *, run_id: Any, **kwargs: Any) -> None:
            self._bridge.on_error(str(run_id), error)


def register(bridge: CallbackBridge) -> bool:
    """Install the handler globally; False when langchain is unavailable."""
    if BaseCallbackHandler is None:
        return False
    try:
        from contextvars import ContextVar

        from langchain_core.tracers.context import register_configure_hook  # type: ignore

        handler = LangChainHandler(bridge)
        var: ContextVar[Any] = ContextVar("ait_client_callback", default=None)
        register_configure_hook(var, inheritable=True)
        var.set(handler)
        return True
    except Exception as exc:  # never let instrumentation break user code
        log.debug("langchain registration failed: %s", exc)
        return False
