"""CLI tests: exit-code discipline and thin-binding behavior.

Most commands run in-process through ``ait.cli.main``; serve tests
spawn the real process and signal it.
"""

from __future__ import annotations

import json
import signal
import socket
import subprocess
import sys
import time
from pathlib import Path

import pytest

from ait.cli import main
from ait.config import ProjectConfig
from ait.emit import build_session
from ait.protocol import encode_event, encode_handshake
from ait.store import TraceStore
from ait.yamlio import atomic_write, dump_yaml


def run_cli(root: Path, *argv: str) -> int:
    return main(["-C", str(root), *argv])


def feed_completed_session(root: Path, run_id: str, content: str = "hi", **kw):
    project = ProjectConfig(root=root)
    store = TraceStore(project.data_path)
    handshake, events = build_session(
        run_id, {"messages": [{"content": content}]}, "upper", **kw
    )
    store.begin_session(handshake, encode_handshake(handshake))
    for event in events:
        store.apply_event(run_id, event, encode_event(event))
    store.end_session(run_id)
    return store


# -- detect ---------------------------------------------------------------------


def test_detect_yes(tmp_path, capsys):
    (tmp_path / "agent.py").write_text("import langgraph\n")
    (tmp_path / "other.py").write_text("import os\n")
    assert run_cli(tmp_path, "detect", str(tmp_path)) == 0
    out = capsys.readouterr().out
    assert "agent.py" in out
    assert "other.py" not in out
    assert "AI-project: yes" in out


def test_detect_no_on_empty_dir(tmp_path, capsys):
    assert run_cli(tmp_path, "detect", str(tmp_path)) == 1
    assert "AI-project: no" in capsys.readouterr().out


def test_detect_matches_inside_comments(tmp_path, capsys):
    # documented v1 limitation: the scan is textual, not syntactic
    (tmp_path / "notes.py").write_text("# import langchain someday\n")
    assert run_cli(tmp_path, "detect", str(tmp_path)) == 0
    assert "AI-project: yes" in capsys.readouterr().out


def test_detect_skips_dependency_dirs(tmp_path):
    dep = tmp_path / "node_modules" / "langchain"
    dep.mkdir(parents=True)
    (dep / "index.js").write_text("import langchain\n")
    (tmp_path / ".git").mkdir()
    (tmp_path / ".git" / "hook.py").write_text("import langgraph\n")
    assert run_cli(tmp_path, "detect", str(tmp_path)) == 1


def test_detect_quoted_js_import(tmp_path):
    (tmp_path / "app.ts").write_text('import { x } from "langchain/agents";\n')
    assert run_cli(tmp_path, "detect", str(tmp_path)) == 0


def test_detect_custom_markers_from_config(tmp_path):
    config_dir = tmp_path / ".ait"
    config_dir.mkdir()
    atomic_write(config_dir / "config.yaml", dump_yaml({"framework_markers": ["myagentlib"]}))
    (tmp_path / "agent.py").write_text("import langgraph\n")
    assert run_cli(tmp_path, "detect", str(tmp_path)) == 1
    (tmp_path / "mine.py").write_text("from myagentlib import Agent\n")
    assert run_cli(tmp_path, "detect", str(tmp_path)) == 0


def test_detect_requires_directory(tmp_path):
    assert run_cli(tmp_path, "detect", str(tmp_path / "missing")) == 2


# -- traces ---------------------------------------------------------------------


def test_traces_list_and_show(tmp_path, capsys):
    feed_completed_session(tmp_path, "run-1", "plan the day", with_tool="read_schedule")
    assert run_cli(tmp_path, "traces", "list") == 0
    out = capsys.readouterr().out
    assert "run-1" in out and "completed" in out

    assert run_cli(tmp_path, "traces", "show", "run-1") == 0
    out = capsys.readouterr().out
    assert "read_schedule" in out
    assert "state=completed" in out


def test_traces_show_raw_is_json(tmp_path, capsys):
    feed_completed_session(tmp_path, "run-1")
    assert run_cli(tmp_path, "traces", "show", "run-1", "--raw") == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["run_id"] == "run-1"
    assert doc["state"] == "completed"
    assert doc["root"]["kind"] == "run_root"


def test_traces_show_unknown_exits_2(tmp_path, capsys):
    assert run_cli(tmp_path, "traces", "show", "ghost") == 2
    assert "ghost" in capsys.readouterr().err


def test_traces_show_graphless(tmp_path, capsys):
    feed_completed_session(tmp_path, "run-1")
    assert run_cli(tmp_path, "traces", "show", "run-1", "--graph") == 0
    assert "no graph recorded" in capsys.readouterr().out


def test_traces_replay(tmp_path, capsys):
    store = feed_completed_session(tmp_path, "run-1")
    recording = store.trace_path("run-1")
    other = tmp_path / "elsewhere"
    assert run_cli(other, "traces", "replay", str(recording)) == 0
    out = capsys.readouterr().out
    assert "replayed run-1" in out and "state=completed" in out
    replayed = TraceStore(ProjectConfig(root=other).data_path).trace_path("run-1")
    assert replayed.read_bytes() == recording.read_bytes()


def test_traces_replay_missing_file(tmp_path):
    assert run_cli(tmp_path, "traces", "replay", str(tmp_path / "nope.ndjson")) == 2


# -- dataset --------------------------------------------------------------------


def test_dataset_lifecycle(tmp_path, capsys):
    assert (
        run_cli(
            tmp_path, "dataset", "create", "sched",
            "--input-path", "$.messages[0].content",
            "--output-path", "$.messages[0].content",
        )
        == 0
    )
    assert (
        run_cli(
            tmp_path, "dataset", "add", "sched",
            "--input", '{"messages":[{"content":"plan"}]}',
            "--reference", '"PLAN"',
        )
        == 0
    )
    capsys.readouterr()
    assert run_cli(tmp_path, "dataset", "show", "sched") == 0
    out = capsys.readouterr().out
    assert "dp-1" in out and "PLAN" in out
    assert run_cli(tmp_path, "dataset", "list") == 0
    assert "sched  rows=1" in capsys.readouterr().out


def test_dataset_add_from_trace(tmp_path, capsys):
    feed_completed_session(tmp_path, "run-7", "plan my day")
    run_cli(
        tmp_path, "dataset", "create", "sched",
        "--input-path", "$.messages[0].content",
        "--output-path", "$.messages[0].content",
    )
    assert run_cli(tmp_path, "dataset", "add", "sched", "--from-trace", "run-7") == 0
    capsys.readouterr()
    run_cli(tmp_path, "dataset", "show", "sched")
    out = capsys.readouterr().out
    assert "source_trace: run-7" in out
    assert "PLAN MY DAY" in out  # reference from the root output


def test_dataset_add_from_unknown_trace(tmp_path):
    run_cli(tmp_path, "dataset", "create", "d", "--input-path", "$", "--output-path", "$")
    assert run_cli(tmp_path, "dataset", "add", "d", "--from-trace", "ghost") == 2


def test_dataset_create_duplicate(tmp_path):
    run_cli(tmp_path, "dataset", "create", "d", "--input-path", "$", "--output-path", "$")
    assert run_cli(tmp_path, "dataset", "create", "d", "--input-path", "$", "--output-path", "$") == 2


def test_dataset_create_bad_path(tmp_path, capsys):
    assert run_cli(tmp_path, "dataset", "create", "d", "--input-path", "nope", "--output-path", "$") == 2
    assert "column" in capsys.readouterr().err


def test_dataset_add_invalid_json(tmp_path):
    run_cli(tmp_path, "dataset", "create", "d", "--input-path", "$", "--output-path", "$")
    assert run_cli(tmp_path, "dataset", "add", "d", "--input", "{oops", "--reference", "1") == 2


def test_dataset_show_unknown(tmp_path):
    assert run_cli(tmp_path, "dataset", "show", "ghost") == 2


# -- eval -----------------------------------------------------------------------


def eval_fixture(tmp_path: Path, references: list[str]) -> None:
    from ait.datasets import DatasetStore
    from ait.evals import EvalConfigStore, EvaluationConfig, RunCommand
    from ait.evaluators import EvaluatorSpec

    project = ProjectConfig(root=tmp_path)
    datasets = DatasetStore(project.datasets_dir)
    dataset = datasets.create("sched", "$.messages[0].content", "$.messages[0].content")
    for i, reference in enumerate(references):
        datasets.add_manual(dataset, {"messages": [{"content": f"task {i}"}]}, reference)
    EvalConfigStore(project.evals_dir).save(
        EvaluationConfig(
            name="upper-eval",
            dataset="sched",
            run_command=RunCommand(argv=[sys.executable, "-m", "ait.emit", "--transform", "upper"]),
            evaluators=[EvaluatorSpec(name="exact_match", kind="exact_match")],
            timeout_s=60,
        )
    )


def test_eval_run_all_pass_exit_0(tmp_path, capsys):
    eval_fixture(tmp_path, ["TASK 0", "TASK 1"])
    assert run_cli(tmp_path, "eval", "run", "upper-eval") == 0
    out = capsys.readouterr().out
    assert "2 passed, 0 failed, mean exact_match 1.00" in out
    assert out.count("exact_match=1.00") == 2  # per-row progress lines


def test_eval_run_failing_row_exit_1(tmp_path, capsys):
    eval_fixture(tmp_path, ["TASK 0", "WRONG"])
    assert run_cli(tmp_path, "eval", "run", "upper-eval") == 1
    assert "1 passed, 1 failed, mean exact_match 0.50" in capsys.readouterr().out


def test_eval_run_unknown_config(tmp_path):
    assert run_cli(tmp_path, "eval", "run", "ghost") == 2


def test_eval_report_formats(tmp_path, capsys):
    eval_fixture(tmp_path, ["TASK 0", "WRONG"])
    run_cli(tmp_path, "eval", "run", "upper-eval")
    capsys.readouterr()
    project = ProjectConfig(root=tmp_path)
    reports = sorted((project.evals_dir / "runs").glob("*.yaml"))
    assert len(reports) == 1

    assert run_cli(tmp_path, "eval", "report", str(reports[0])) == 0
    assert "1 passed, 1 failed" in capsys.readouterr().out

    assert run_cli(tmp_path, "eval", "report", str(reports[0]), "--format", "json") == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["config"] == "upper-eval"

    assert run_cli(tmp_path, "eval", "report", str(reports[0]), "--format", "junit") == 0
    from junitcheck import validate_junit

    validate_junit(capsys.readouterr().out.encode("utf-8"))


def test_eval_report_missing_file(tmp_path):
    assert run_cli(tmp_path, "eval", "report", str(tmp_path / "nope.yaml")) == 2


def test_eval_list(tmp_path, capsys):
    eval_fixture(tmp_path, ["TASK 0"])
    assert run_cli(tmp_path, "eval", "list") == 0
    assert "upper-eval" in capsys.readouterr().out


# -- emit -----------------------------------------------------------------------


def test_emit_without_address_prints_output(tmp_path, capsys, monkeypatch):
    monkeypatch.delenv("AIT_TRACE_ADDR", raising=False)
    monkeypatch.delenv("AIT_DATAPOINT_INPUT", raising=False)
    assert run_cli(tmp_path, "emit", "--transform", "upper") == 0
    assert json.loads(capsys.readouterr().out) == {
        "messages": [{"content": "HELLO WORLD"}]
    }


def test_emit_unreachable_address(tmp_path, capsys, monkeypatch):
    monkeypatch.setenv("AIT_TRACE_ADDR", "127.0.0.1:1")
    assert run_cli(tmp_path, "emit", "--transform", "echo") == 1
    assert "cannot send trace" in capsys.readouterr().err


def test_emit_bad_transform(tmp_path, capsys, monkeypatch):
    monkeypatch.delenv("AIT_TRACE_ADDR", raising=False)
    assert run_cli(tmp_path, "emit", "--transform", "rot13") == 2


def test_usage_error_exits_2():
    with pytest.raises(SystemExit) as exc:
        main(["traces"])  # missing subcommand
    assert exc.value.code == 2


# -- serve ----------------------------------------------------------------------


def start_serve(root: Path) -> tuple[subprocess.Popen, str, str]:
    proc = subprocess.Popen(
        [sys.executable, "-m", "ait", "-C", str(root), "serve", "--port", "0", "--http-port", "0"],
        stdout=subprocess.PIPE,
        stderr=subprocess.PIPE,
        text=True,
    )
    banner = [proc.stdout.readline() for _ in range(2)]
    assert banner[0].startswith("trace ingest listening on "), banner
    assert banner[1].startswith("http api listening on "), banner
    ingest_addr = banner[0].rsplit(" ", 1)[1].strip()
    http_addr = banner[1].rsplit(" ", 1)[1].strip()
    return proc, ingest_addr, http_addr


def test_serve_banner_and_clean_shutdown(tmp_path):
    proc, ingest_addr, http_addr = start_serve(tmp_path)
    try:
        assert ":" in ingest_addr and http_addr.startswith("http://")
    finally:
        proc.send_signal(signal.SIGINT)
        assert proc.wait(timeout=10) == 0


def test_serve_sigint_persists_open_sessions_as_aborted(tmp_path):
    proc, ingest_addr, _ = start_serve(tmp_path)
    try:
        host, _, port = ingest_addr.rpartition(":")
        handshake, events = build_session(
            "interrupted-run", {"messages": [{"content": "x"}]}, "echo"
        )
        conn = socket.create_connection((host, int(port)), timeout=5)
        conn.sendall(encode_handshake(handshake))
        conn.sendall(encode_event(events[0]))  # run_start only, session left open
        trace_file = tmp_path / ".ait" / "traces" / "interrupted-run.trace.ndjson"
        deadline = time.monotonic() + 5
        while not trace_file.exists() and time.monotonic() < deadline:
            time.sleep(0.02)
        assert trace_file.exists()
    finally:
        proc.send_signal(signal.SIGINT)
        assert proc.wait(timeout=10) == 0
        conn.close()
    store = TraceStore(ProjectConfig(root=tmp_path).data_path)
    trace = store.get("interrupted-run")
    assert trace.state == "aborted"


def test_serve_bind_error_fails_fast(tmp_path):
    blocker = socket.socket()
    blocker.bind(("127.0.0.1", 0))
    blocker.listen(1)
    port = blocker.getsockname()[1]
    try:
        result = subprocess.run(
            [sys.executable, "-m", "ait", "-C", str(tmp_path), "serve", "--port", str(port)],
            capture_output=True,
            text=True,
            timeout=15,
        )
        assert result.returncode == 1
        assert "cannot bind ingest port" in result.stderr
    finally:
        blocker.close()
