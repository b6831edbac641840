"""Minimal JSON path grammar for dataset extraction.

Point lookups only: ``$`` is the document itself, ``.name`` picks an
object member (bare names limited to ``[A-Za-z0-9_-]+``), ``["..."]``
picks arbitrarily named members, ``[n]`` picks an array element.  No
wildcards, slices, filters, or recursive descent.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Any, Union


class PathError(Exception):
    pass


class PathSyntaxError(PathError):
    """Invalid path text; column is 1-based into the original string."""

    def __init__(self, column: int, reason: str) -> None:
        super().__init__(f"column {column}: {reason}")
        self.column = column
        self.reason = reason


class ExtractionError(PathError):
    """A step could not be applied; names the step and the value's kind."""

    def __init__(self, step_index: int, step_text: str, reason: str) -> None:
        super().__init__(f"step {step_index} ({step_text}): {reason}")
        self.step_index = step_index
        self.step_text = step_text
        self.reason = reason


@dataclass(frozen=True)
class Key:
    name: str


@dataclass(frozen=True)
class Index:
    n: int

    def __post_init__(self) -> None:
        if self.n < 0:
            raise ValueError("index steps are unsigned")


Step = Union[Key, Index]

_BARE_KEY = re.compile(r"[A-Za-z0-9_-]+")
_DIGITS = re.compile(r"[0-9]+")


def render_step(step: Step) -> str:
    if isinstance(step, Index):
        return f"[{step.n}]"
    if _BARE_KEY.fullmatch(step.name):
        return f".{step.name}"
    escaped = step.name.replace("\\", "\\\\").replace('"', '\\"')
    return f'["{escaped}"]'


@dataclass(frozen=True)
class JsonPath:
    steps: tuple[Step, ...] = ()

    def render(self) -> str:
        return "$" + "".join(render_step(s) for s in self.steps)

    def __str__(self) -> str:
        return self.render()


def parse_path(text: str) -> JsonPath:
    if not text.startswith("$"):
        raise PathSyntaxError(1, "path must start with '$'")
    steps: list[Step] = []
    i = 1
    while i < len(text):
        start_col = i + 1
        c = text[i]
        if c == ".":
            m = _BARE_KEY.match(text, i + 1)
            if m is None:
                raise PathSyntaxError(start_col, "expected a key name after '.'")
            steps.append(Key(m.group()))
            i = m.end()
        elif c == "[":
            if text.startswith('"', i + 1):
                name, i = _parse_quoted(text, i + 1, start_col)
                if not text.startswith("]", i):
                    raise PathSyntaxError(start_col, "expected ']' after quoted key")
                steps.append(Key(name))
                i += 1
            else:
                m = _DIGITS.match(text, i + 1)
                if m is None:
                    raise PathSyntaxError(start_col, "expected digits or a quoted key after '['")
                if not text.startswith("]", m.end()):
                    raise PathSyntaxError(start_col, "expected ']' after index")
                steps.append(Index(int(m.group())))
                i = m.end() + 1
        else:
            raise PathSyntaxError(start_col, f"unexpected character {c!r}")
    return JsonPath(tuple(steps))


def _parse_quoted(text: str, i: int, start_col: int) -> tuple[str, int]:
    """Parse from the opening quote at text[i]; returns (key, pos past quote)."""
    chars: list[str] = []
    i += 1
    while i < len(text):
        c = text[i]
        if c == '"':
            return "".join(chars), i + 1
        if c == "\\":
            if i + 1 >= len(text) or text[i + 1] not in ('"', "\\"):
                raise PathSyntaxError(i + 1, "invalid escape in quoted key")
            chars.append(text[i + 1])
            i += 2
            continue
        chars.append(c)
        i += 1
    raise PathSyntaxError(start_col, "unterminated quoted key")


def render(path: JsonPath) -> str:
    return path.render()


def json_kind(value: Any) -> str:
    if value is None:
        return "null"
    if isinstance(value, bool):
        return "boolean"
    if isinstance(value, (int, float)):
        return "number"
    if isinstance(value, str):
        return "string"
    if isinstance(value, list):
        return "array"
    if isinstance(value, dict):
        return "object"
    return type(value).__name__


def extract(path: JsonPath, doc: Any) -> Any:
    current = doc
    for index, step in enumerate(path.steps, start=1):
        text = render_step(step)
        if isinstance(step, Key):
            if not isinstance(current, dict):
                raise ExtractionError(
                    index, text, f"expected an object, got {json_kind(current)}"
                )
            if step.name not in current:
                raise ExtractionError(index, text, f"key {step.name!r} not found in object")
            current = current[step.name]
        else:
            if not isinstance(current, list):
                raise ExtractionError(
                    index, text, f"expected an array, got {json_kind(current)}"
                )
            if step.n >= len(current):
                raise ExtractionError(
                    index, text, f"index {step.n} out of range for array of length {len(current)}"
                )
            current = current[step.n]
    return current
