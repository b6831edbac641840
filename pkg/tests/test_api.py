"""HTTP/WS API tests, including CLI/API file equivalence."""

from __future__ import annotations

import json
import sys
import time
from pathlib import Path

import pytest
from fastapi.testclient import TestClient

from ait.api import build_app
from ait.cli import main as cli_main
from ait.config import ProjectConfig
from ait.emit import build_session
from ait.protocol import encode_event, encode_handshake
from ait.server import replay
from ait.store import TraceStore


@pytest.fixture()
def project(tmp_path):
    return ProjectConfig(root=tmp_path)


@pytest.fixture()
def store(project):
    return TraceStore(project.data_path)


@pytest.fixture()
def client(project, store):
    return TestClient(build_app(project, store))


def feed_session(store: TraceStore, run_id: str, content: str = "hi", **kw):
    handshake, events = build_session(
        run_id, {"messages": [{"content": content}]}, "upper", base_ts=1_755_000_000_000, **kw
    )
    store.begin_session(handshake, encode_handshake(handshake))
    for event in events:
        store.apply_event(run_id, event, encode_event(event))
    store.end_session(run_id)
    return events


def count_spans(node: dict) -> int:
    return 1 + sum(count_spans(child) for child in node["children"])


# -- runs -----------------------------------------------------------------------


def test_runs_empty(client):
    assert client.get("/api/runs").json() == {"runs": []}


def test_run_detail_includes_tree_and_pretty(client, store):
    feed_session(store, "run-1", "plan", with_tool="read_schedule")
    runs = client.get("/api/runs").json()["runs"]
    assert [r["run_id"] for r in runs] == ["run-1"]

    doc = client.get("/api/runs/run-1").json()
    assert doc["state"] == "completed"
    assert doc["total_usage"]["total_tokens"] == 15
    # pretty lines and the span tree describe the same spans
    assert count_spans(doc["root"]) == len(doc["pretty"])
    # the index counts spans below the root
    assert runs[0]["span_count"] == len(doc["pretty"]) - 1
    headlines = [line["headline"] for line in doc["pretty"]]
    assert any("read_schedule" in h for h in headlines)


def test_unknown_run_404(client):
    response = client.get("/api/runs/ghost")
    assert response.status_code == 404
    body = response.json()
    assert body["error"] == "not_found"
    assert "ghost" in body["message"]


# -- datasets -------------------------------------------------------------------


def make_dataset(client, name="sched"):
    response = client.post(
        "/api/datasets",
        json={
            "name": name,
            "input_path": "$.messages[0].content",
            "output_path": "$.messages[0].content",
        },
    )
    assert response.status_code == 201
    return response


def test_dataset_create_list_show(client):
    make_dataset(client)
    listing = client.get("/api/datasets").json()["datasets"]
    assert listing == [
        {
            "name": "sched",
            "input_path": "$.messages[0].content",
            "output_path": "$.messages[0].content",
            "row_count": 0,
        }
    ]
    doc = client.get("/api/datasets/sched").json()
    assert doc["name"] == "sched"
    assert doc["rows"] == []


def test_dataset_duplicate_409(client):
    make_dataset(client)
    response = client.post(
        "/api/datasets",
        json={"name": "sched", "input_path": "$", "output_path": "$"},
    )
    assert response.status_code == 409
    assert response.json()["error"] == "duplicate"


def test_dataset_bad_path_400(client):
    response = client.post(
        "/api/datasets", json={"name": "d", "input_path": "oops", "output_path": "$"}
    )
    assert response.status_code == 400
    assert "column" in response.json()["message"]


def test_dataset_unknown_404(client):
    assert client.get("/api/datasets/ghost").status_code == 404


def test_add_row_manual(client):
    make_dataset(client)
    response = client.post(
        "/api/datasets/sched/rows",
        json={"input": {"messages": [{"content": "x"}]}, "reference": "X", "note": "hand"},
    )
    assert response.status_code == 201
    assert response.json() == {
        "id": "dp-1",
        "input": {"messages": [{"content": "x"}]},
        "reference_output": "X",
        "note": "hand",
    }


def test_add_row_from_trace(client, store):
    feed_session(store, "run-9", "plan my day")
    make_dataset(client)
    response = client.post("/api/datasets/sched/rows", json={"from_trace": "run-9"})
    assert response.status_code == 201
    row = response.json()
    assert row["input"] == "plan my day"
    assert row["reference_output"] == "PLAN MY DAY"
    assert row["source_trace"] == "run-9"


def test_add_row_from_trace_with_reference_override(client, store):
    feed_session(store, "run-9", "plan my day")
    make_dataset(client)
    response = client.post(
        "/api/datasets/sched/rows", json={"from_trace": "run-9", "reference": None}
    )
    assert response.status_code == 201
    assert response.json()["reference_output"] is None


def test_add_row_unknown_trace_404(client):
    make_dataset(client)
    assert (
        client.post("/api/datasets/sched/rows", json={"from_trace": "ghost"}).status_code
        == 404
    )


def test_add_row_promotion_failure_422(client, store):
    feed_session(store, "run-9")
    response = client.post(
        "/api/datasets",
        json={"name": "bad", "input_path": "$.nope", "output_path": "$"},
    )
    assert response.status_code == 201
    response = client.post("/api/datasets/bad/rows", json={"from_trace": "run-9"})
    assert response.status_code == 422
    assert response.json()["error"] == "promotion_failed"
    # failed promotion leaves the dataset unchanged
    assert client.get("/api/datasets/bad").json()["rows"] == []


def test_add_row_body_validation_400(client):
    make_dataset(client)
    response = client.post("/api/datasets/sched/rows", json={"input": {"a": 1}})
    assert response.status_code == 400


# -- CLI/API equivalence ---------------------------------------------------------


def test_cli_and_api_produce_identical_dataset_files(tmp_path):
    cli_root = tmp_path / "via-cli"
    api_root = tmp_path / "via-api"
    for root in (cli_root, api_root):
        store = TraceStore(ProjectConfig(root=root).data_path)
        feed_session(store, "run-1", "plan my day")

    assert (
        cli_main(
            ["-C", str(cli_root), "dataset", "create", "sched",
             "--input-path", "$.messages[0].content",
             "--output-path", "$.messages[0].content"]
        )
        == 0
    )
    assert (
        cli_main(
            ["-C", str(cli_root), "dataset", "add", "sched",
             "--input", '{"messages":[{"content":"x"}]}', "--reference", '"X"']
        )
        == 0
    )
    assert cli_main(["-C", str(cli_root), "dataset", "add", "sched", "--from-trace", "run-1"]) == 0

    api_project = ProjectConfig(root=api_root)
    client = TestClient(build_app(api_project, TraceStore(api_project.data_path)))
    make_dataset(client)
    assert (
        client.post(
            "/api/datasets/sched/rows",
            json={"input": {"messages": [{"content": "x"}]}, "reference": "X"},
        ).status_code
        == 201
    )
    assert client.post("/api/datasets/sched/rows", json={"from_trace": "run-1"}).status_code == 201

    cli_bytes = (cli_root / ".ait" / "datasets" / "sched.yaml").read_bytes()
    api_bytes = (api_root / ".ait" / "datasets" / "sched.yaml").read_bytes()
    assert cli_bytes == api_bytes


# -- evals ----------------------------------------------------------------------


def eval_fixture(project: ProjectConfig, references: list[str]) -> None:
    from ait.datasets import DatasetStore
    from ait.evals import EvalConfigStore, EvaluationConfig, RunCommand
    from ait.evaluators import EvaluatorSpec

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


def poll_eval_run(client, eval_run_id: str, timeout_s: float = 30.0) -> dict:
    deadline = time.monotonic() + timeout_s
    while time.monotonic() < deadline:
        doc = client.get(f"/api/evals/runs/{eval_run_id}").json()
        if doc.get("status") != "running":
            return doc
        time.sleep(0.05)
    raise AssertionError("evaluation did not finish in time")


def test_eval_listing_and_run(client, project):
    eval_fixture(project, ["TASK 0", "WRONG"])
    listing = client.get("/api/evals").json()["evals"]
    assert listing[0]["name"] == "upper-eval"
    assert listing[0]["dataset"] == "sched"
    assert listing[0]["evaluators"] == ["exact_match"]

    response = client.post("/api/evals/upper-eval/run")
    assert response.status_code == 202
    eval_run_id = response.json()["eval_run_id"]
    assert eval_run_id.startswith("upper-eval-")

    doc = poll_eval_run(client, eval_run_id)
    assert doc["status"] == "done"
    report = doc["report"]
    assert [row["scores"]["exact_match"]["value"] for row in report["rows"]] == [1.0, 0.0]
    assert report["aggregates"]["means"]["exact_match"] == 0.5

    # the report is listed and fetchable by its file stem after completion
    listing = client.get("/api/evals").json()["evals"]
    assert len(listing[0]["reports"]) == 1
    stem = listing[0]["reports"][0]
    by_stem = client.get(f"/api/evals/runs/{stem}").json()
    assert by_stem["status"] == "done"
    assert by_stem["report"] == report


def test_eval_run_unknown_config_404(client):
    assert client.post("/api/evals/ghost/run").status_code == 404


def test_eval_run_unknown_id_404(client):
    assert client.get("/api/evals/runs/ghost").status_code == 404


# -- websocket ------------------------------------------------------------------


def test_ws_snapshot_then_stream(client, store):
    feed_session(store, "run-1", "one")
    with client.websocket_connect("/api/live") as ws:
        snapshot = json.loads(ws.receive_text())
        assert snapshot["type"] == "snapshot"
        assert [r["run_id"] for r in snapshot["runs"]] == ["run-1"]

        events = feed_session(store, "run-2", "two")
        messages = [json.loads(ws.receive_text()) for _ in range(len(events) + 2)]
        assert messages[0] == {
            "type": "run_started",
            "run_id": "run-2",
            "framework": "ait-emit",
            "started_ts_unix_ms": 1_755_000_000_000,
        }
        assert [m["type"] for m in messages[1:-1]] == ["event"] * len(events)
        assert [m["seq"] for m in messages[1:-1]] == list(range(1, len(events) + 1))
        assert messages[-1] == {"type": "run_finished", "run_id": "run-2", "state": "completed"}


def test_ws_one_message_per_event_during_replay(client, store, tmp_path):
    source_store = TraceStore(tmp_path / "source")
    events = feed_session(source_store, "run-5", "replayed")
    recording = source_store.trace_path("run-5")

    with client.websocket_connect("/api/live") as ws:
        assert json.loads(ws.receive_text())["type"] == "snapshot"
        replay(recording, store)
        messages = [json.loads(ws.receive_text()) for _ in range(len(events) + 2)]
    event_messages = [m for m in messages if m["type"] == "event"]
    assert len(event_messages) == len(events)
    assert store.trace_path("run-5").read_bytes() == recording.read_bytes()


def test_ws_run_filter(client, store):
    with client.websocket_connect("/api/live?run=run-b") as ws:
        json.loads(ws.receive_text())  # snapshot
        feed_session(store, "run-a", "one")
        feed_session(store, "run-b", "two")
        first = json.loads(ws.receive_text())
        assert first["type"] == "run_started"
        assert first["run_id"] == "run-b"


def test_ws_eval_progress(client, project):
    eval_fixture(project, ["TASK 0", "TASK 1"])
    with client.websocket_connect("/api/live") as ws:
        json.loads(ws.receive_text())  # snapshot
        response = client.post("/api/evals/upper-eval/run")
        eval_run_id = response.json()["eval_run_id"]
        progress = []
        while True:
            message = json.loads(ws.receive_text())
            if message["type"] == "eval_finished":
                assert message["eval_run_id"] == eval_run_id
                assert "report" in message
                break
            if message["type"] == "eval_progress":
                progress.append(message)
    assert len(progress) == 2
    assert {p["row"]["id"] for p in progress} == {"dp-1", "dp-2"}
    assert all(p["eval_run_id"] == eval_run_id for p in progress)


# -- root index -----------------------------------------------------------------


def test_root_index_without_ui(client):
    doc = client.get("/").json()
    assert doc["service"] == "ait"
    assert "/api/runs" in doc["endpoints"]


def test_static_ui_mount(tmp_path, project, store):
    ui = tmp_path / "ui"
    ui.mkdir()
    (ui / "index.html").write_text("<html><body>ait ui</body></html>")
    client = TestClient(build_app(project, store, ui_dir=ui))
    response = client.get("/")
    assert response.status_code == 200
    assert "ait ui" in response.text
    # API still reachable under the mount
    assert client.get("/api/runs").json() == {"runs": []}
