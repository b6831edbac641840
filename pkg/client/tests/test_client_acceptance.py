"""Acceptance: the two headline guarantees of the client package.

1. Transparency: wrapping a process changes nothing the user can see,
   while the traced session is accepted cleanly by the service.
2. Injection: evaluation rows flow through the env contract into the
   agent and come back as that agent's scripted transform of each input.
"""

from __future__ import annotations

import json
import subprocess
import sys
from pathlib import Path

from harness import clean_env, run_cli

SIM = [sys.executable, "-m", "ait_client.sim"]
WRAP = [sys.executable, "-m", "ait_client.runner", "--"]


def test_transparency_of_wrapped_echo(server) -> None:
    env = clean_env(AIT_TRACE_ADDR=server.addr)
    before = server.run_ids()

    bare = subprocess.run(SIM + ["echo"], capture_output=True, text=True, env=env, timeout=60)
    wrapped = subprocess.run(WRAP + SIM + ["echo"], capture_output=True, text=True, env=env, timeout=60)

    assert wrapped.stdout == bare.stdout
    assert wrapped.returncode == bare.returncode == 0

    # with tracing enabled both sessions are accepted with zero schema errors
    new = server.run_ids() - before
    assert len(new) == 2
    for run_id in new:
        doc = server.wait_run(run_id)
        assert doc["state"] == "completed"
        assert doc["anomalies"] == []


def test_injection_contract_through_eval(tmp_path: Path) -> None:
    root = tmp_path
    assert run_cli(root, "dataset", "create", "inj", "--input-path", "$", "--output-path", "$.messages[0].content").returncode == 0
    for word in ("alpha", "bravo"):
        added = run_cli(
            root, "dataset", "add", "inj",
            "--input", json.dumps({"messages": [{"content": word}]}),
            "--reference", json.dumps(word),
        )
        assert added.returncode == 0, added.stderr

    evals_dir = root / ".ait" / "evals"
    evals_dir.mkdir(parents=True, exist_ok=True)
    (evals_dir / "client-injection.yaml").write_text(
        "name: client-injection\n"
        "dataset: inj\n"
        "run_command:\n"
        "  argv:\n"
        f"  - {sys.executable}\n"
        "  - -m\n"
        "  - ait_client.sim\n"
        "  - echo\n"
        "evaluators:\n"
        "- name: exact_match\n"
        "  kind: exact_match\n"
        "parallelism: 2\n"
    )

    ran = run_cli(root, "eval", "run", "client-injection")
    assert ran.returncode == 0, ran.stderr

    report_path = next((evals_dir / "runs").glob("client-injection-*.yaml"))
    rendered = run_cli(root, "eval", "report", str(report_path), "--format", "json")
    assert rendered.returncode == 0, rendered.stderr
    report = json.loads(rendered.stdout)

    rows = {row["id"]: row for row in report["rows"]}
    assert set(rows) == {"dp-1", "dp-2"}
    outputs = {rows["dp-1"]["generated_output"], rows["dp-2"]["generated_output"]}
    assert outputs == {"alpha", "bravo"}  # distinct, one per injected input
    for row in rows.values():
        assert row["status"] == "ok"
        assert row["scores"]["exact_match"]["value"] == 1.0  # matches the echo transform
        assert row["trace_ref"]
    assert report["aggregates"]["means"]["exact_match"] == 1.0
