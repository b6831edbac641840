"""ait-sim: a deterministic scripted agent for exercising the pipeline.

Three scenarios, all driven through the toy framework so span structure
comes from callbacks rather than hand-written emits:

- echo      one node, one llm call, answers with the input content
- schedule  two agent steps with a tool call in between, plus a graph
- flaky     fails or succeeds deterministically from seed and input

Output goes to stdout as compact JSON whether or not tracing is active,
so wrapped and unwrapped invocations are byte-identical there. Under
ait-run the ambient session is reused instead of opening a second run.
"""

from __future__ import annotations

import argparse
import json
import os
import random
import sys
from typing import Any, Optional

from . import autostart, fakeframework
from .bridge import CallbackBridge
from .fakeframework import LLM, Graph, Node, Tool, announce_graph
from .session import ClientSession, compact_json

SCHEDULE_ANSWER = "You have a 9am standup and a 3pm design review."
SCHEDULE_TOOL_RESULT = "9:00 standup; 15:00 design review"

SCHEDULE_GRAPH = Graph(
    nodes=["__start__", "agent", "tools", "__end__"],
    edges=[
        ("__start__", "agent", None),
        ("agent", "tools", "tool_calls"),
        ("tools", "agent", None),
        ("agent", "__end__", "end"),
    ],
)


def content_of(doc: Any) -> str:
    """First message content, a bare string, or the compact JSON form."""
    if isinstance(doc, dict):
        messages = doc.get("messages")
        if isinstance(messages, list) and messages:
            first = messages[0]
            if isinstance(first, dict) and isinstance(first.get("content"), str):
                return first["content"]
    if isinstance(doc, str):
        return doc
    return compact_json(doc)


def flaky_fails(seed: int, content: str) -> bool:
    """Failure rule for the flaky scenario; documented, not incidental."""
    return random.Random(f"{seed}:{content}").random() < 0.5


def _echo(input_doc: Any) -> Any:
    content = content_of(input_doc)

    def respond(value: Any) -> tuple[Any, dict]:
        return {"messages": [{"content": content}]}, {"prompt_tokens": 7, "completion_tokens": 3}

    llm = LLM("responder", respond)
    return Node("agent", lambda value: llm.invoke(value)).invoke(input_doc)


def _schedule(input_doc: Any) -> Any:
    announce_graph(SCHEDULE_GRAPH)
    decide = LLM(
        "llm",
        lambda value: ({"tool_calls": [{"name": "read_schedule"}]}, {"prompt_tokens": 42, "completion_tokens": 17}),
    )
    read = Tool("read_schedule", lambda value: SCHEDULE_TOOL_RESULT)
    answer = LLM(
        "llm",
        lambda value: ({"messages": [{"content": SCHEDULE_ANSWER}]}, {"prompt_tokens": 58, "completion_tokens": 24}),
    )

    def first_step(value: Any) -> Any:
        decision = decide.invoke(value)
        read.invoke({"query": "today"})
        return decision

    state = Node("agent", first_step).invoke(input_doc)
    return Node("agent", lambda value: answer.invoke(value)).invoke(state)


def _flaky(input_doc: Any, seed: int) -> Any:
    content = content_of(input_doc)
    fails = flaky_fails(seed, content)

    def lookup(value: Any) -> str:
        if fails:
            raise RuntimeError("flaky_lookup failed (simulated)")
        return "lookup ok"

    tool = Tool("flaky_lookup", lookup)

    def run(value: Any) -> Any:
        tool.invoke(content)
        return {"messages": [{"content": content}]}

    return Node("agent", run).invoke(input_doc)


def run_scenario(scenario: str, input_doc: Any, seed: int) -> Any:
    if scenario == "echo":
        return _echo(input_doc)
    if scenario == "schedule":
        return _schedule(input_doc)
    if scenario == "flaky":
        return _flaky(input_doc, seed)
    raise ValueError(f"unknown scenario: {scenario}")


def _input_doc() -> Any:
    raw = os.environ.get("AIT_DATAPOINT_INPUT")
    if raw is None:
        return {"messages": [{"content": "hello world"}]}
    try:
        return json.loads(raw)
    except ValueError:
        return raw


def main(argv: Optional[list[str]] = None) -> int:
    parser = argparse.ArgumentParser(prog="ait-sim", description="Run a scripted agent scenario.")
    parser.add_argument("scenario", nargs="?", default="echo", choices=["echo", "schedule", "flaky"])
    parser.add_argument("--seed", type=int, default=None, help="flaky seed, defaults to AIT_SIM_SEED or 0")
    args = parser.parse_args(argv)

    input_doc = _input_doc()
    seed = args.seed if args.seed is not None else int(os.environ.get("AIT_SIM_SEED", "0"))

    if autostart.current_session() is not None:
        # wrapped by ait-run: the ambient run owns start/end framing
        try:
            output = run_scenario(args.scenario, input_doc, seed)
        except Exception as exc:
            message = f"{type(exc).__name__}: {exc}"
            autostart.set_run_error(message)
            print(f"ait-sim: {message}", file=sys.stderr)
            return 1
        autostart.set_run_output(output)
        print(compact_json(output))
        return 0

    session = ClientSession(framework="ait-sim")
    session.start()
    bridge = CallbackBridge(session)
    fakeframework.register_callback(bridge)
    session.run_start(input_doc)
    try:
        output = run_scenario(args.scenario, input_doc, seed)
    except Exception as exc:
        message = f"{type(exc).__name__}: {exc}"
        session.error(message)
        session.run_end({"status": "error", "error": message})
        session.close()
        fakeframework.unregister_callback(bridge)
        print(f"ait-sim: {message}", file=sys.stderr)
        return 1
    session.run_end(output)
    session.close()
    fakeframework.unregister_callback(bridge)
    print(compact_json(output))
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
