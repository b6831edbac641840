#!/usr/bin/env python3
"""Record real API responses for the UI contract tests.

Boots the service in a scratch project, replays the shared schedule
trace, builds the five-row upper-eval, runs it, and snapshots the
documented GET endpoints plus the live WebSocket transcript into
frontend/tests/fixtures/. Every number the UI tests assert against
comes from these files, so they are recorded, never hand-written.

Usage: python frontend/scripts/record-fixtures.py
"""

from __future__ import annotations

import json
import re
import signal
import socket
import subprocess
import sys
import tempfile
import threading
import time
import urllib.request
from pathlib import Path

from websockets.sync.client import connect

REPO = Path(__file__).resolve().parent.parent.parent
FIXTURES_IN = REPO / "tests" / "fixtures" / "schedule.trace.ndjson"
FIXTURES_OUT = REPO / "frontend" / "tests" / "fixtures"

CONTENTS = ["plan my day", "book a room", "send the notes", "file the report", "call the team"]

EVAL_YAML = """\
name: upper-eval
dataset: sched
run_command:
  argv:
  - {python}
  - -m
  - ait
  - emit
  - --transform
  - upper
evaluators:
- name: exact_match
  kind: exact_match
timeout_s: 60
parallelism: 1
"""


def get(base: str, path: str) -> dict:
    with urllib.request.urlopen(f"{base}{path}", timeout=10) as resp:
        return json.load(resp)


def post(base: str, path: str, body: dict) -> dict:
    req = urllib.request.Request(
        f"{base}{path}",
        data=json.dumps(body).encode(),
        headers={"content-type": "application/json"},
        method="POST",
    )
    with urllib.request.urlopen(req, timeout=10) as resp:
        return json.load(resp)


def start_server(root: Path) -> tuple[subprocess.Popen, str, str]:
    proc = subprocess.Popen(
        [sys.executable, "-m", "ait", "-C", str(root), "serve", "--port", "0", "--http-port", "0"],
        stdout=subprocess.PIPE,
        stderr=subprocess.STDOUT,
        text=True,
    )
    http_addr = None
    ingest_addr = None
    deadline = time.time() + 20
    assert proc.stdout is not None
    while time.time() < deadline and (http_addr is None or ingest_addr is None):
        line = proc.stdout.readline()
        if not line:
            break
        match = re.search(r"trace ingest listening on (\S+)", line)
        if match:
            ingest_addr = match.group(1)
        match = re.search(r"http api listening on (\S+)", line)
        if match:
            http_addr = match.group(1)
    if http_addr is None or ingest_addr is None:
        proc.kill()
        raise SystemExit("server did not announce its addresses")
    threading.Thread(target=proc.stdout.read, daemon=True).start()
    return proc, http_addr.rstrip("/"), ingest_addr


def stream_trace(ingest_addr: str, file: Path) -> None:
    """Replay the recorded session over the live wire, byte for byte."""
    host, port = ingest_addr.rsplit(":", 1)
    with socket.create_connection((host, int(port)), timeout=10) as sock:
        sock.sendall(file.read_bytes())
        sock.shutdown(socket.SHUT_WR)
        while sock.recv(4096):
            pass


def main() -> None:
    FIXTURES_OUT.mkdir(parents=True, exist_ok=True)
    with tempfile.TemporaryDirectory(prefix="ait-ui-fixtures-") as td:
        root = Path(td)
        proc, base, ingest_addr = start_server(root)
        try:
            ws_messages: list[dict] = []
            ws_url = base.replace("http", "ws", 1) + "/api/live"
            ws = connect(ws_url)

            def pump() -> None:
                try:
                    while True:
                        ws_messages.append(json.loads(ws.recv()))
                except Exception:
                    pass

            pump_thread = threading.Thread(target=pump, daemon=True)
            pump_thread.start()

            # dataset + rows over the documented HTTP API
            post(base, "/api/datasets", {
                "name": "sched",
                "input_path": "$.messages[0].content",
                "output_path": "$.messages[0].content",
            })
            for i, content in enumerate(CONTENTS):
                reference = content.upper() if i != 4 else "WRONG ON PURPOSE"
                post(base, "/api/datasets/sched/rows", {
                    "input": {"messages": [{"content": content}]},
                    "reference": reference,
                })

            # eval config in the documented file format
            evals_dir = root / ".ait" / "evals"
            evals_dir.mkdir(parents=True, exist_ok=True)
            (evals_dir / "upper-eval.yaml").write_text(EVAL_YAML.format(python=sys.executable))

            # the shared trace, through the live wire so the WS
            # transcript carries its run_started / event / run_finished
            stream_trace(ingest_addr, FIXTURES_IN)
            deadline = time.time() + 30
            while time.time() < deadline:
                runs = get(base, "/api/runs")["runs"]
                if any(r["run_id"] == "schedule-demo" and r["state"] == "completed" for r in runs):
                    break
                time.sleep(0.2)
            else:
                raise SystemExit("replayed run never completed")

            launched = post(base, "/api/evals/upper-eval/run", {})
            eval_run_id = launched["eval_run_id"]
            deadline = time.time() + 120
            while time.time() < deadline:
                state = get(base, f"/api/evals/runs/{eval_run_id}")
                if state.get("status") == "done":
                    break
                time.sleep(0.3)
            else:
                raise SystemExit("eval run did not finish in time")

            # let the tail of the WS stream (eval_finished) arrive
            time.sleep(1.0)

            snapshots = {
                "runs.json": get(base, "/api/runs"),
                "run_schedule-demo.json": get(base, "/api/runs/schedule-demo"),
                "datasets.json": get(base, "/api/datasets"),
                "dataset_sched.json": get(base, "/api/datasets/sched"),
                "evals.json": get(base, "/api/evals"),
                "eval_run.json": get(base, f"/api/evals/runs/{eval_run_id}"),
            }
            ws.close()
            pump_thread.join(timeout=5)
            snapshots["ws_transcript.json"] = ws_messages
            for name, doc in snapshots.items():
                path = FIXTURES_OUT / name
                path.write_text(json.dumps(doc, indent=2) + "\n")
                print(f"wrote {path.relative_to(REPO)}")
        finally:
            proc.send_signal(signal.SIGINT)
            try:
                proc.wait(timeout=10)
            except subprocess.TimeoutExpired:
                proc.kill()


if __name__ == "__main__":
    main()
