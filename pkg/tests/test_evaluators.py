"""Evaluator scoring contracts, judged against independent oracles."""

import json
import random
import sys

import pytest
from hypothesis import given, settings, strategies as st

import ait.evaluators as ev
from ait.evaluators import (
    EvaluatorError,
    EvaluatorSpec,
    EvaluatorSpecError,
    Score,
    first_score_object,
    levenshtein,
    render_judge_prompt,
    run_evaluator,
    score_command,
    score_contains,
    score_exact_match,
    score_json_equal,
    score_llm_judge,
    score_similarity,
)
from ait.mockjudge import MockJudgeServer

from gen import random_json


# -- independent oracles -----------------------------------------------------


def levenshtein_matrix(a, b):
    """Full-matrix edit distance, the textbook formulation."""
    m, n = len(a), len(b)
    d = [[0] * (n + 1) for _ in range(m + 1)]
    for i in range(m + 1):
        d[i][0] = i
    for j in range(n + 1):
        d[0][j] = j
    for i in range(1, m + 1):
        for j in range(1, n + 1):
            d[i][j] = min(
                d[i - 1][j] + 1,
                d[i][j - 1] + 1,
                d[i - 1][j - 1] + (a[i - 1] != b[j - 1]),
            )
    return d[m][n]


def oracle_first_score_object(text):
    """Enumerate substrings; earliest-starting parseable object with a score."""
    for i in range(len(text)):
        if text[i] != "{":
            continue
        for j in range(i + 1, len(text) + 1):
            try:
                value = json.loads(text[i:j])
            except ValueError:
                continue
            if (
                isinstance(value, dict)
                and isinstance(value.get("score"), (int, float))
                and not isinstance(value.get("score"), bool)
            ):
                return value
            break  # an object starting at i parses at exactly one j
    return None


# -- exact_match / json_equal / contains ---------------------------------------


def test_exact_match_golden():
    assert score_exact_match("4", "4").value == 1.0
    assert score_exact_match("4 ", "4").value == 1.0
    assert score_exact_match({"a": 1}, {"a": 2}).value == 0.0
    assert score_exact_match({"a": " x "}, {"a": "x"}).value == 1.0
    assert score_exact_match([1, "two ", None], [1, "two", None]).value == 1.0
    assert score_exact_match(5, 5.0).value == 1.0


def test_exact_match_bool_is_not_int():
    assert score_exact_match(True, 1).value == 0.0
    assert score_exact_match(False, 0).value == 0.0
    assert score_exact_match([True], [1]).value == 0.0
    assert score_exact_match(True, True).value == 1.0


def test_json_equal_does_not_trim():
    assert score_json_equal("4 ", "4").value == 0.0
    assert score_json_equal({"a": [1, 2]}, {"a": [1, 2]}).value == 1.0
    assert score_json_equal(True, 1).value == 0.0


@given(st.recursive(
    st.none() | st.booleans() | st.integers() | st.floats(allow_nan=False) | st.text(max_size=10),
    lambda inner: st.lists(inner, max_size=3) | st.dictionaries(st.text(max_size=5), inner, max_size=3),
    max_leaves=12,
))
def test_reflexivity(doc):
    assert score_exact_match(doc, doc).value == 1.0
    assert score_json_equal(doc, doc).value == 1.0
    assert score_similarity(doc, doc).value == 1.0


def test_contains():
    assert score_contains("hello world", "world").value == 1.0
    assert score_contains("hello", "world").value == 0.0
    assert score_contains({"a": [1, 2]}, 1).value == 1.0  # compact JSON membership
    assert score_contains("anything", "").value == 1.0


# -- similarity ------------------------------------------------------------------


def test_similarity_golden():
    kitten = score_similarity("kitten", "sitting")
    assert kitten.value == pytest.approx(1 - 3 / 7)
    assert score_similarity("", "abc").value == 0.0
    assert score_similarity("", "").value == 1.0
    assert score_similarity("ABC", "abc").value == 1.0
    assert score_similarity("ABC", "abc", {"case_sensitive": True}).value < 1.0


def test_levenshtein_against_matrix_oracle():
    rng = random.Random(404)
    alphabet = "abcde"
    for _ in range(300):
        a = "".join(rng.choices(alphabet, k=rng.randint(0, 12)))
        b = "".join(rng.choices(alphabet, k=rng.randint(0, 12)))
        assert levenshtein(a, b) == levenshtein_matrix(a, b)


@given(st.text(max_size=15), st.text(max_size=15))
def test_similarity_symmetry(a, b):
    assert score_similarity(a, b).value == score_similarity(b, a).value


@given(st.text(max_size=15), st.text(max_size=15))
def test_levenshtein_matches_oracle_property(a, b):
    assert levenshtein(a, b) == levenshtein_matrix(a, b)


# -- Score / spec validation ------------------------------------------------------


def test_score_rejects_out_of_range():
    with pytest.raises(ValueError):
        Score(1.7)
    with pytest.raises(ValueError):
        Score(-0.1)
    with pytest.raises(ValueError):
        Score(True)


def test_clamp_emits_warning(caplog):
    with caplog.at_level("WARNING", logger="ait.evaluators"):
        assert ev.clamp_score(1.7, "test") == 1.0
        assert ev.clamp_score(-2, "test") == 0.0
        assert ev.clamp_score(0.5, "test") == 0.5
    clamp_warnings = [r for r in caplog.records if "clamped" in r.message]
    assert len(clamp_warnings) == 2


def test_spec_validation():
    EvaluatorSpec("m", "exact_match")
    EvaluatorSpec("s", "similarity", {"case_sensitive": True})
    with pytest.raises(EvaluatorSpecError, match="unknown evaluator kind"):
        EvaluatorSpec("x", "regex_match")
    with pytest.raises(EvaluatorSpecError, match="unknown parameter"):
        EvaluatorSpec("m", "exact_match", {"case_sensitive": True})
    with pytest.raises(EvaluatorSpecError, match="case_sensitive"):
        EvaluatorSpec("s", "similarity", {"case_sensitive": "yes"})
    with pytest.raises(EvaluatorSpecError, match="argv"):
        EvaluatorSpec("c", "command", {"argv": []})
    with pytest.raises(EvaluatorSpecError, match="prompt_template"):
        EvaluatorSpec(
            "j",
            "llm_judge",
            {"endpoint_url": "http://x", "model": "m", "prompt_template": "{{output}} only"},
        )
    EvaluatorSpec(
        "j",
        "llm_judge",
        {
            "endpoint_url": "http://x",
            "model": "m",
            "prompt_template": "out {{output}} ref {{reference}} in {{input}}",
        },
    )


# -- command evaluator ---------------------------------------------------------


def py_cmd(code):
    return [sys.executable, "-c", code]


ALWAYS_ONE = "import json,sys; sys.stdin.read(); print(json.dumps({'score': 1.0}))"

IDENTITY_CHECK = """
import json, sys
def eq(a, b):
    if isinstance(a, bool) or isinstance(b, bool):
        return isinstance(a, bool) and isinstance(b, bool) and a == b
    if isinstance(a, str) and isinstance(b, str):
        return a.strip() == b.strip()
    if isinstance(a, (int, float)) and isinstance(b, (int, float)):
        return a == b
    if isinstance(a, list) and isinstance(b, list):
        return len(a) == len(b) and all(eq(x, y) for x, y in zip(a, b))
    if isinstance(a, dict) and isinstance(b, dict):
        return set(a) == set(b) and all(eq(a[k], b[k]) for k in a)
    return a is None and b is None
row = json.load(sys.stdin)
print(json.dumps({"score": 1.0 if eq(row["output"], row["reference"]) else 0.0}))
"""


def test_command_always_one():
    score = score_command("in", "out", "ref", {"argv": py_cmd(ALWAYS_ONE)})
    assert score.value == 1.0


def test_command_receives_row_json():
    code = (
        "import json,sys; row=json.load(sys.stdin);"
        " print(json.dumps({'score': 0.0, 'explanation': json.dumps(row, sort_keys=True)}))"
    )
    score = score_command({"q": 1}, [2], "r", {"argv": py_cmd(code)})
    assert json.loads(score.explanation) == {"input": {"q": 1}, "output": [2], "reference": "r"}


def test_command_nonzero_exit():
    with pytest.raises(EvaluatorError, match="code 2"):
        score_command(1, 2, 3, {"argv": py_cmd("import sys; sys.exit(2)")})


def test_command_malformed_output():
    with pytest.raises(EvaluatorError, match="invalid JSON"):
        score_command(1, 2, 3, {"argv": py_cmd("print('gibberish')")})
    with pytest.raises(EvaluatorError, match="numeric score"):
        score_command(1, 2, 3, {"argv": py_cmd("print('{\"note\": 1}')")})


def test_command_timeout():
    with pytest.raises(EvaluatorError, match="timed out"):
        score_command(1, 2, 3, {"argv": py_cmd("import time; time.sleep(30)"), "timeout_s": 1})


def test_command_stderr_tail_in_error():
    code = "import sys; print('diagnostic detail', file=sys.stderr); sys.exit(3)"
    with pytest.raises(EvaluatorError, match="diagnostic detail"):
        score_command(1, 2, 3, {"argv": py_cmd(code)})


def test_command_clamps_with_warning(caplog):
    with caplog.at_level("WARNING", logger="ait.evaluators"):
        score = score_command(1, 2, 3, {"argv": py_cmd(
            "import json,sys; sys.stdin.read(); print(json.dumps({'score': 2.5}))"
        )})
    assert score.value == 1.0
    assert any("clamped" in r.message for r in caplog.records)


def test_command_agrees_with_exact_match_on_random_rows():
    rng = random.Random(513)
    spec = EvaluatorSpec("id-check", "command", {"argv": py_cmd(IDENTITY_CHECK)})
    checked = 0
    for _ in range(100):
        output = random_json(rng, 2)
        reference = output if rng.random() < 0.5 else random_json(rng, 2)
        expected = score_exact_match(output, reference).value
        got = run_evaluator(spec, None, output, reference).value
        assert got == expected
        checked += 1
    assert checked == 100


# -- judge prompt and reply parsing ---------------------------------------------


def test_render_judge_prompt_compact_json():
    prompt = render_judge_prompt(
        "in={{input}} out={{output}} ref={{reference}}",
        {"a": 1},
        "text",
        [1, 2],
    )
    assert prompt == 'in={"a":1} out="text" ref=[1,2]'


def test_first_score_object_golden():
    assert first_score_object('{"score": 0.5}') == {"score": 0.5}
    assert first_score_object('blah {"score": 0.5} blah') == {"score": 0.5}
    assert first_score_object('{"a":1} then {"score":0.25}') == {"score": 0.25}
    assert first_score_object('{"a": {"score": 0.9}}') == {"score": 0.9}
    assert first_score_object('{"score": "high"} {"score": 0.1}') == {"score": 0.1}
    assert first_score_object('{"score": true} {"score": 0}') == {"score": 0}
    assert first_score_object("no objects here") is None
    assert first_score_object('{"broken": ') is None


@settings(max_examples=150)
@given(
    st.text(alphabet="ab{} :,\"0123456789", max_size=30),
    st.floats(min_value=0, max_value=1, allow_nan=False),
    st.text(alphabet="ab{} :,\"0123456789", max_size=30),
)
def test_first_score_object_matches_scanning_oracle(prefix, score, suffix):
    text = prefix + json.dumps({"score": score}) + suffix
    assert first_score_object(text) == oracle_first_score_object(text)


@given(st.text(max_size=60))
def test_first_score_object_total(text):
    assert first_score_object(text) == oracle_first_score_object(text)


# -- judge over HTTP against the mock endpoint ------------------------------------


@pytest.fixture(scope="module")
def judge():
    with MockJudgeServer() as server:
        yield server


def judge_params(server, model, **extra):
    return {
        "endpoint_url": server.url,
        "model": model,
        "prompt_template": "Compare {{output}} with {{reference}} for {{input}}.",
        **extra,
    }


@pytest.fixture(autouse=True)
def fast_retry(monkeypatch):
    monkeypatch.setattr(ev, "_JUDGE_RETRY_BACKOFF_S", 0.05)


def test_judge_clean_reply(judge):
    score = score_llm_judge("q", "a", "b", judge_params(judge, "clean"))
    assert score.value == 0.9
    assert score.explanation == "close"


def test_judge_clamps_out_of_range(judge, caplog):
    with caplog.at_level("WARNING", logger="ait.evaluators"):
        score = score_llm_judge("q", "a", "b", judge_params(judge, "out-of-range"))
    assert score.value == 1.0
    assert any("clamped" in r.message for r in caplog.records)


def test_judge_extracts_from_prose(judge):
    score = score_llm_judge("q", "a", "b", judge_params(judge, "prose"))
    assert score.value == 0.5
    assert score.explanation == "partial match"


def test_judge_malformed_reply_carries_raw(judge):
    with pytest.raises(EvaluatorError) as exc:
        score_llm_judge("q", "a", "b", judge_params(judge, "malformed"))
    assert "no JSON object" in str(exc.value)
    assert "refuse to emit JSON" in str(exc.value)


def test_judge_retries_once_then_errors(judge):
    before = judge.request_count
    with pytest.raises(EvaluatorError, match="unreachable after retry"):
        score_llm_judge("q", "a", "b", judge_params(judge, "fail-always"))
    assert judge.request_count - before == 2


def test_judge_transient_failure_recovers(judge):
    before = judge.request_count
    score = score_llm_judge("q", "a", "b", judge_params(judge, "fail-once"))
    assert score.value == 0.9
    assert judge.request_count - before == 2


def test_judge_sends_bearer_token(judge, monkeypatch):
    monkeypatch.setenv("JUDGE_KEY", "secret-token")
    score = score_llm_judge(
        "q", "a", "b", judge_params(judge, "require-auth", api_key_env="JUDGE_KEY")
    )
    assert score.value == 0.9
    monkeypatch.delenv("JUDGE_KEY")
    with pytest.raises(EvaluatorError):
        score_llm_judge(
            "q", "a", "b", judge_params(judge, "require-auth", api_key_env="JUDGE_KEY")
        )


def test_judge_does_not_mutate_inputs(judge):
    row_input, generated, reference = {"a": [1]}, {"b": 2}, {"c": 3}
    score_llm_judge(row_input, generated, reference, judge_params(judge, "clean"))
    assert (row_input, generated, reference) == ({"a": [1]}, {"b": 2}, {"c": 3})


def test_judge_unreachable_endpoint():
    params = {
        "endpoint_url": "http://127.0.0.1:1",  # nothing listens on port 1
        "model": "clean",
        "prompt_template": "{{output}} {{reference}}",
    }
    with pytest.raises(EvaluatorError, match="unreachable after retry"):
        score_llm_judge("q", "a", "b", params)
