"""Pluggable row scoring.

Six evaluator kinds: exact_match, json_equal, contains, similarity,
llm_judge (OpenAI-compatible chat completions), and command (child
process speaking JSON over stdin/stdout).  Every evaluator returns a
Score in [0, 1]; out-of-range judge or command values are clamped with a
logged warning, never silently.
"""

from __future__ import annotations

import json
import logging
import os
import subprocess
import time
from dataclasses import dataclass, field
from typing import Any, Optional

import httpx

from .trace import compact_json

log = logging.getLogger("ait.evaluators")

EVALUATOR_KINDS = ("exact_match", "json_equal", "contains", "similarity", "llm_judge", "command")

JUDGE_SYSTEM_PROMPT = (
    "You are an evaluation judge. Compare the generated output against the"
    " reference. Reply with a single JSON object of the form"
    ' {"score": <number between 0 and 1>, "explanation": "<short text>"}'
    " and nothing else."
)

_JUDGE_RETRY_BACKOFF_S = 1.0
_JUDGE_TIMEOUT_S = 60.0
_COMMAND_TIMEOUT_S = 30
_RAW_REPLY_LIMIT = 1024


class EvaluatorError(Exception):
    """Scoring failed; the row is reported as evaluator_error."""


class EvaluatorSpecError(Exception):
    """An evaluator definition is invalid; names the offending field."""


@dataclass(frozen=True)
class Score:
    value: float
    explanation: Optional[str] = None

    def __post_init__(self) -> None:
        if not isinstance(self.value, (int, float)) or isinstance(self.value, bool):
            raise ValueError(f"score value must be a number, got {self.value!r}")
        if not 0.0 <= float(self.value) <= 1.0:
            raise ValueError(f"score value {self.value} outside [0, 1]")
        object.__setattr__(self, "value", float(self.value))


def clamp_score(value: float, source: str) -> float:
    clamped = min(max(float(value), 0.0), 1.0)
    if clamped != value:
        log.warning("%s returned score %s outside [0, 1]; clamped to %s", source, value, clamped)
    return clamped


@dataclass
class EvaluatorSpec:
    name: str
    kind: str
    params: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not isinstance(self.name, str) or not self.name:
            raise EvaluatorSpecError("name: must be a non-empty string")
        if self.kind not in EVALUATOR_KINDS:
            raise EvaluatorSpecError(
                f"kind: unknown evaluator kind {self.kind!r}"
                f" (expected one of {', '.join(EVALUATOR_KINDS)})"
            )
        if not isinstance(self.params, dict):
            raise EvaluatorSpecError("params: must be a mapping")
        validator = getattr(self, f"_validate_{self.kind}")
        validator(dict(self.params))

    def _reject_unknown(self, params: dict[str, Any], allowed: tuple[str, ...]) -> None:
        for key in params:
            if key not in allowed:
                raise EvaluatorSpecError(
                    f"params.{key}: unknown parameter for kind {self.kind!r}"
                )

    def _validate_exact_match(self, params: dict[str, Any]) -> None:
        self._reject_unknown(params, ())

    def _validate_json_equal(self, params: dict[str, Any]) -> None:
        self._reject_unknown(params, ())

    def _validate_contains(self, params: dict[str, Any]) -> None:
        self._reject_unknown(params, ())

    def _validate_similarity(self, params: dict[str, Any]) -> None:
        self._reject_unknown(params, ("case_sensitive",))
        flag = params.get("case_sensitive", False)
        if not isinstance(flag, bool):
            raise EvaluatorSpecError("params.case_sensitive: must be a boolean")

    def _validate_llm_judge(self, params: dict[str, Any]) -> None:
        self._reject_unknown(
            params, ("endpoint_url", "model", "prompt_template", "api_key_env", "temperature")
        )
        for key in ("endpoint_url", "model", "prompt_template"):
            if not isinstance(params.get(key), str) or not params[key]:
                raise EvaluatorSpecError(f"params.{key}: required non-empty string")
        template = params["prompt_template"]
        for placeholder in ("{{output}}", "{{reference}}"):
            if placeholder not in template:
                raise EvaluatorSpecError(
                    f"params.prompt_template: missing required placeholder {placeholder}"
                )
        api_key_env = params.get("api_key_env")
        if api_key_env is not None and (not isinstance(api_key_env, str) or not api_key_env):
            raise EvaluatorSpecError("params.api_key_env: must be a non-empty string when present")
        temperature = params.get("temperature", 0)
        if not isinstance(temperature, (int, float)) or isinstance(temperature, bool):
            raise EvaluatorSpecError("params.temperature: must be a number")

    def _validate_command(self, params: dict[str, Any]) -> None:
        self._reject_unknown(params, ("argv", "timeout_s"))
        argv = params.get("argv")
        if (
            not isinstance(argv, list)
            or not argv
            or not all(isinstance(a, str) and a for a in argv)
        ):
            raise EvaluatorSpecError("params.argv: required non-empty list of strings")
        timeout_s = params.get("timeout_s", _COMMAND_TIMEOUT_S)
        if not isinstance(timeout_s, int) or isinstance(timeout_s, bool) or timeout_s <= 0:
            raise EvaluatorSpecError("params.timeout_s: must be a positive integer")


# -- structural comparison -----------------------------------------------------


def _json_equal(a: Any, b: Any, trim: bool) -> bool:
    # bool first: it would otherwise compare equal to 0/1
    if isinstance(a, bool) or isinstance(b, bool):
        return isinstance(a, bool) and isinstance(b, bool) and a == b
    if isinstance(a, str) and isinstance(b, str):
        return a.strip() == b.strip() if trim else a == b
    if isinstance(a, (int, float)) and isinstance(b, (int, float)):
        return a == b
    if isinstance(a, list) and isinstance(b, list):
        return len(a) == len(b) and all(_json_equal(x, y, trim) for x, y in zip(a, b))
    if isinstance(a, dict) and isinstance(b, dict):
        return a.keys() == b.keys() and all(_json_equal(a[k], b[k], trim) for k in a)
    return a is None and b is None


def _coerce_text(value: Any) -> str:
    return value if isinstance(value, str) else compact_json(value)


# -- standard metrics ---------------------------------------------------------


def score_exact_match(generated: Any, reference: Any) -> Score:
    return Score(1.0 if _json_equal(generated, reference, trim=True) else 0.0)


def score_json_equal(generated: Any, reference: Any) -> Score:
    return Score(1.0 if _json_equal(generated, reference, trim=False) else 0.0)


def score_contains(generated: Any, reference: Any) -> Score:
    return Score(1.0 if _coerce_text(reference) in _coerce_text(generated) else 0.0)


def levenshtein(a: str, b: str) -> int:
    if len(a) < len(b):
        a, b = b, a
    if not b:
        return len(a)
    previous = list(range(len(b) + 1))
    for i, ca in enumerate(a, start=1):
        current = [i]
        for j, cb in enumerate(b, start=1):
            current.append(
                min(
                    previous[j] + 1,  # deletion
                    current[j - 1] + 1,  # insertion
                    previous[j - 1] + (ca != cb),  # substitution
                )
            )
        previous = current
    return previous[-1]


def score_similarity(generated: Any, reference: Any, params: Optional[dict] = None) -> Score:
    params = params or {}
    g, r = _coerce_text(generated), _coerce_text(reference)
    if not params.get("case_sensitive", False):
        g, r = g.lower(), r.lower()
    longest = max(len(g), len(r))
    if longest == 0:
        return Score(1.0)
    return Score(1.0 - levenshtein(g, r) / longest)


# -- LLM-as-a-judge -------------------------------------------------------------


def render_judge_prompt(template: str, input: Any, generated: Any, reference: Any) -> str:
    return (
        template.replace("{{input}}", compact_json(input))
        .replace("{{output}}", compact_json(generated))
        .replace("{{reference}}", compact_json(reference))
    )


def first_score_object(text: str) -> Optional[dict]:
    """First JSON object in the text carrying a numeric "score" member."""
    decoder = json.JSONDecoder()
    start = text.find("{")
    while start != -1:
        try:
            value, _ = decoder.raw_decode(text, start)
        except ValueError:
            value = None
        if isinstance(value, dict):
            score = value.get("score")
            if isinstance(score, (int, float)) and not isinstance(score, bool):
                return value
        start = text.find("{", start + 1)
    return None


def _truncate_reply(text: str) -> str:
    return text.encode("utf-8")[:_RAW_REPLY_LIMIT].decode("utf-8", errors="ignore")


def _judge_url(endpoint_url: str) -> str:
    if endpoint_url.rstrip("/").endswith("/chat/completions"):
        return endpoint_url
    return endpoint_url.rstrip("/") + "/chat/completions"


def score_llm_judge(input: Any, generated: Any, reference: Any, params: dict) -> Score:
    prompt = render_judge_prompt(params["prompt_template"], input, generated, reference)
    body = {
        "model": params["model"],
        "messages": [
            {"role": "system", "content": JUDGE_SYSTEM_PROMPT},
            {"role": "user", "content": prompt},
        ],
        "temperature": params.get("temperature", 0),
    }
    headers = {"Content-Type": "application/json"}
    api_key_env = params.get("api_key_env")
    if api_key_env and os.environ.get(api_key_env):
        headers["Authorization"] = f"Bearer {os.environ[api_key_env]}"
    url = _judge_url(params["endpoint_url"])

    last_error: Optional[str] = None
    for attempt in range(2):
        if attempt:
            time.sleep(_JUDGE_RETRY_BACKOFF_S)
        try:
            response = httpx.post(url, json=body, headers=headers, timeout=_JUDGE_TIMEOUT_S)
            response.raise_for_status()
        except httpx.HTTPError as exc:
            last_error = str(exc)
            log.warning("judge request failed (attempt %d): %s", attempt + 1, exc)
            continue
        return _parse_judge_reply(response.text)
    raise EvaluatorError(f"judge endpoint unreachable after retry: {last_error}")


def _parse_judge_reply(raw: str) -> Score:
    try:
        payload = json.loads(raw)
        content = payload["choices"][0]["message"]["content"]
        if not isinstance(content, str):
            raise TypeError("content is not a string")
    except (ValueError, LookupError, TypeError) as exc:
        raise EvaluatorError(
            f"judge reply is not a chat completion ({exc}); raw reply: {_truncate_reply(raw)}"
        ) from exc
    obj = first_score_object(content)
    if obj is None:
        raise EvaluatorError(
            f"judge reply contains no JSON object with a numeric score;"
            f" raw reply: {_truncate_reply(content)}"
        )
    explanation = obj.get("explanation")
    if explanation is not None and not isinstance(explanation, str):
        explanation = compact_json(explanation)
    return Score(clamp_score(obj["score"], "llm_judge"), explanation)


# -- custom command -------------------------------------------------------------


def score_command(input: Any, generated: Any, reference: Any, params: dict) -> Score:
    argv = params["argv"]
    timeout_s = params.get("timeout_s", _COMMAND_TIMEOUT_S)
    payload = compact_json({"input": input, "output": generated, "reference": reference})
    try:
        proc = subprocess.run(
            argv,
            input=payload.encode("utf-8"),
            capture_output=True,
            timeout=timeout_s,
        )
    except subprocess.TimeoutExpired:
        raise EvaluatorError(f"command evaluator timed out after {timeout_s}s: {argv[0]}")
    except OSError as exc:
        raise EvaluatorError(f"command evaluator failed to start: {exc}")
    stderr_tail = proc.stderr.decode("utf-8", errors="replace")[-_RAW_REPLY_LIMIT:]
    if proc.returncode != 0:
        raise EvaluatorError(
            f"command evaluator exited with code {proc.returncode}; stderr: {stderr_tail}"
        )
    stdout = proc.stdout.decode("utf-8", errors="replace")
    try:
        reply = json.loads(stdout)
    except ValueError:
        raise EvaluatorError(
            f"command evaluator printed invalid JSON: {_truncate_reply(stdout)!r};"
            f" stderr: {stderr_tail}"
        )
    if not isinstance(reply, dict):
        raise EvaluatorError(f"command evaluator must print a JSON object, got {json.dumps(reply)[:100]}")
    score = reply.get("score")
    if not isinstance(score, (int, float)) or isinstance(score, bool):
        raise EvaluatorError(f"command evaluator reply has no numeric score: {_truncate_reply(stdout)!r}")
    explanation = reply.get("explanation")
    if explanation is not None and not isinstance(explanation, str):
        raise EvaluatorError("command evaluator explanation must be a string when present")
    return Score(clamp_score(score, "command"), explanation)


# -- dispatch --------------------------------------------------------------------


def run_evaluator(spec: EvaluatorSpec, input: Any, generated: Any, reference: Any) -> Score:
    if spec.kind == "exact_match":
        return score_exact_match(generated, reference)
    if spec.kind == "json_equal":
        return score_json_equal(generated, reference)
    if spec.kind == "contains":
        return score_contains(generated, reference)
    if spec.kind == "similarity":
        return score_similarity(generated, reference, spec.params)
    if spec.kind == "llm_judge":
        return score_llm_judge(input, generated, reference, spec.params)
    if spec.kind == "command":
        return score_command(input, generated, reference, spec.params)
    raise EvaluatorError(f"unknown evaluator kind {spec.kind!r}")
