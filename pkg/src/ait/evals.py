"""Evaluation engine: one child process per datapoint.

Each row launches the configured run command with three environment
additions: AIT_DATAPOINT_INPUT (the row input as compact JSON),
AIT_TRACE_ADDR (the ingest address) and AIT_RUN_ID (a fresh uuid the
client must use as its session run_id).  The engine waits for process
exit and trace completion, extracts the generated output with the
dataset's output path, scores it with every configured evaluator, and
keeps the complete per-row trace.  Row failures never abort the run.
"""

from __future__ import annotations

import concurrent.futures
import json
import os
import subprocess
import time
import uuid
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Optional

from .config import ProjectConfig
from .datasets import Dataset, DatasetStore
from .evaluators import EvaluatorError, EvaluatorSpec, EvaluatorSpecError, run_evaluator
from .jsonpath import ExtractionError, extract
from .protocol import TokenUsage
from .server import IngestServer
from .store import TraceStore
from .trace import compact_json
from .yamlio import atomic_write, dump_yaml, load_yaml

ROW_STATUSES = ("ok", "run_error", "timeout", "extract_error", "evaluator_error")

_STDERR_TAIL = 1024
_TRACE_GRACE_S = 2.0

# distinguishes "no output extracted" from a legitimate JSON null output
_MISSING = object()


class EvalError(Exception):
    pass


class EvalConfigError(EvalError):
    """Invalid evaluation config; names the offending key."""

    def __init__(self, key_path: str, reason: str) -> None:
        super().__init__(f"{key_path}: {reason}")
        self.key_path = key_path
        self.reason = reason


@dataclass
class RunCommand:
    argv: list[str]
    working_dir: Optional[str] = None
    env: dict[str, str] = field(default_factory=dict)


@dataclass
class EvaluationConfig:
    name: str
    dataset: str
    run_command: RunCommand
    evaluators: list[EvaluatorSpec]
    timeout_s: int = 120
    parallelism: int = 1
    pass_threshold: Optional[float] = None  # falls back to the project default

    def to_yaml_dict(self) -> dict[str, Any]:
        rc: dict[str, Any] = {"argv": list(self.run_command.argv)}
        if self.run_command.working_dir is not None:
            rc["working_dir"] = self.run_command.working_dir
        if self.run_command.env:
            rc["env"] = dict(self.run_command.env)
        out: dict[str, Any] = {
            "name": self.name,
            "dataset": self.dataset,
            "run_command": rc,
            "evaluators": [
                {"name": e.name, "kind": e.kind, **({"params": e.params} if e.params else {})}
                for e in self.evaluators
            ],
            "timeout_s": self.timeout_s,
            "parallelism": self.parallelism,
        }
        if self.pass_threshold is not None:
            out["pass_threshold"] = self.pass_threshold
        return out


def _require(condition: bool, key_path: str, reason: str) -> None:
    if not condition:
        raise EvalConfigError(key_path, reason)


def config_from_yaml_dict(raw: Any) -> EvaluationConfig:
    _require(isinstance(raw, dict), "config", "top level must be a mapping")
    for key in ("name", "dataset", "run_command", "evaluators"):
        _require(key in raw, key, "required key missing")
    _require(isinstance(raw["name"], str) and bool(raw["name"]), "name", "must be a non-empty string")
    _require(isinstance(raw["dataset"], str) and bool(raw["dataset"]), "dataset", "must be a non-empty string")

    rc = raw["run_command"]
    _require(isinstance(rc, dict), "run_command", "must be a mapping")
    argv = rc.get("argv")
    _require(
        isinstance(argv, list) and bool(argv) and all(isinstance(a, str) for a in argv),
        "run_command.argv",
        "required non-empty list of strings",
    )
    working_dir = rc.get("working_dir")
    _require(
        working_dir is None or isinstance(working_dir, str),
        "run_command.working_dir",
        "must be a string when present",
    )
    env = rc.get("env", {})
    _require(
        isinstance(env, dict) and all(isinstance(k, str) and isinstance(v, str) for k, v in env.items()),
        "run_command.env",
        "must be a string-to-string mapping",
    )

    raw_evaluators = raw["evaluators"]
    _require(
        isinstance(raw_evaluators, list) and bool(raw_evaluators),
        "evaluators",
        "must be a non-empty list",
    )
    evaluators: list[EvaluatorSpec] = []
    seen_names: set[str] = set()
    for i, item in enumerate(raw_evaluators):
        where = f"evaluators[{i}]"
        _require(isinstance(item, dict), where, "must be a mapping")
        try:
            spec = EvaluatorSpec(
                name=item.get("name", ""),
                kind=item.get("kind", ""),
                params=item.get("params", {}),
            )
        except EvaluatorSpecError as exc:
            raise EvalConfigError(where, str(exc)) from exc
        _require(spec.name not in seen_names, f"{where}.name", f"duplicate evaluator name {spec.name!r}")
        seen_names.add(spec.name)
        evaluators.append(spec)

    timeout_s = raw.get("timeout_s", 120)
    _require(
        isinstance(timeout_s, int) and not isinstance(timeout_s, bool) and timeout_s > 0,
        "timeout_s",
        "must be a positive integer",
    )
    parallelism = raw.get("parallelism", 1)
    _require(
        isinstance(parallelism, int) and not isinstance(parallelism, bool) and parallelism > 0,
        "parallelism",
        "must be a positive integer",
    )
    pass_threshold = raw.get("pass_threshold")
    if pass_threshold is not None:
        _require(
            isinstance(pass_threshold, (int, float))
            and not isinstance(pass_threshold, bool)
            and 0.0 <= float(pass_threshold) <= 1.0,
            "pass_threshold",
            "must be a number in [0, 1]",
        )
        pass_threshold = float(pass_threshold)

    return EvaluationConfig(
        name=raw["name"],
        dataset=raw["dataset"],
        run_command=RunCommand(argv=list(argv), working_dir=working_dir, env=dict(env)),
        evaluators=evaluators,
        timeout_s=timeout_s,
        parallelism=parallelism,
        pass_threshold=pass_threshold,
    )


class EvalConfigStore:
    """Evaluation configs under ``<data_dir>/evals/<name>.yaml``."""

    def __init__(self, evals_dir: Path | str) -> None:
        self.evals_dir = Path(evals_dir)

    def path_for(self, name: str) -> Path:
        return self.evals_dir / f"{name}.yaml"

    @property
    def runs_dir(self) -> Path:
        return self.evals_dir / "runs"

    def list_names(self) -> list[str]:
        if not self.evals_dir.is_dir():
            return []
        return sorted(p.stem for p in self.evals_dir.glob("*.yaml"))

    def load(self, name: str) -> EvaluationConfig:
        path = self.path_for(name)
        if not path.is_file():
            raise EvalError(f"no evaluation config named {name!r}")
        config = config_from_yaml_dict(load_yaml(path))
        _require(config.name == name, "name", f"config name {config.name!r} does not match file {path.name}")
        return config

    def save(self, config: EvaluationConfig) -> None:
        atomic_write(self.path_for(config.name), dump_yaml(config.to_yaml_dict()))

    def list_reports(self, config_name: Optional[str] = None) -> list[Path]:
        if not self.runs_dir.is_dir():
            return []
        paths = sorted(self.runs_dir.glob("*.yaml"))
        if config_name is not None:
            paths = [p for p in paths if p.name.startswith(f"{config_name}-")]
        return paths


# -- results -------------------------------------------------------------------


@dataclass
class RowResult:
    id: str
    status: str
    generated_output: Any = _MISSING
    scores: dict[str, dict[str, Any]] = field(default_factory=dict)
    usage: TokenUsage = field(default_factory=TokenUsage)
    wall_ms: int = 0
    trace_ref: Optional[str] = None
    error: Optional[str] = None
    evaluator_errors: dict[str, str] = field(default_factory=dict)

    @property
    def has_output(self) -> bool:
        return self.generated_output is not _MISSING

    def to_yaml_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {"id": self.id, "status": self.status}
        if self.has_output:
            out["generated_output"] = self.generated_output
        out["scores"] = {
            name: dict(score) for name, score in self.scores.items()
        }
        out["usage"] = self.usage.to_json()
        out["wall_ms"] = self.wall_ms
        if self.trace_ref is not None:
            out["trace_ref"] = self.trace_ref
        if self.error is not None:
            out["error"] = self.error
        if self.evaluator_errors:
            out["evaluator_errors"] = dict(self.evaluator_errors)
        return out


@dataclass
class EvalReport:
    config: str
    dataset: str
    started_ts_unix_ms: int
    ended_ts_unix_ms: int
    pass_threshold: float
    rows: list[RowResult]
    warnings: list[str] = field(default_factory=list)
    path: Optional[Path] = None  # set once persisted; not serialized

    @property
    def means(self) -> dict[str, float]:
        sums: dict[str, float] = {}
        counts: dict[str, int] = {}
        for row in self.rows:
            for name, score in row.scores.items():
                sums[name] = sums.get(name, 0.0) + score["value"]
                counts[name] = counts.get(name, 0) + 1
        return {name: sums[name] / counts[name] for name in sums}

    @property
    def total_usage(self) -> TokenUsage:
        total = TokenUsage()
        for row in self.rows:
            total = total + row.usage
        return total

    @property
    def total_wall_ms(self) -> int:
        return sum(row.wall_ms for row in self.rows)

    @property
    def status_counts(self) -> dict[str, int]:
        counts = {status: 0 for status in ROW_STATUSES}
        for row in self.rows:
            counts[row.status] += 1
        return counts

    def row_passes(self, row: RowResult, threshold: Optional[float] = None) -> bool:
        threshold = self.pass_threshold if threshold is None else threshold
        return row.status == "ok" and all(
            score["value"] >= threshold for score in row.scores.values()
        )

    @property
    def passed_count(self) -> int:
        return sum(1 for row in self.rows if self.row_passes(row))

    def to_yaml_dict(self) -> dict[str, Any]:
        return {
            "config": self.config,
            "dataset": self.dataset,
            "started_ts_unix_ms": self.started_ts_unix_ms,
            "ended_ts_unix_ms": self.ended_ts_unix_ms,
            "pass_threshold": self.pass_threshold,
            "rows": [row.to_yaml_dict() for row in self.rows],
            "aggregates": {
                "means": self.means,
                "total_usage": self.total_usage.to_json(),
                "total_wall_ms": self.total_wall_ms,
                "status_counts": self.status_counts,
            },
            "warnings": list(self.warnings),
        }


def report_from_yaml_dict(raw: Any, path: Optional[Path] = None) -> EvalReport:
    _require(isinstance(raw, dict), "report", "top level must be a mapping")
    for key in ("config", "dataset", "started_ts_unix_ms", "ended_ts_unix_ms", "pass_threshold", "rows"):
        _require(key in raw, key, "required key missing")
    rows: list[RowResult] = []
    for i, item in enumerate(raw["rows"]):
        where = f"rows[{i}]"
        _require(isinstance(item, dict), where, "row must be a mapping")
        _require(item.get("status") in ROW_STATUSES, f"{where}.status", "unknown status")
        usage_raw = item.get("usage", {})
        usage = TokenUsage(
            prompt_tokens=usage_raw.get("prompt_tokens", 0),
            completion_tokens=usage_raw.get("completion_tokens", 0),
            total_tokens=usage_raw.get("total_tokens", 0),
        )
        rows.append(
            RowResult(
                id=item["id"],
                status=item["status"],
                generated_output=item["generated_output"] if "generated_output" in item else _MISSING,
                scores={k: dict(v) for k, v in item.get("scores", {}).items()},
                usage=usage,
                wall_ms=item.get("wall_ms", 0),
                trace_ref=item.get("trace_ref"),
                error=item.get("error"),
                evaluator_errors=dict(item.get("evaluator_errors", {})),
            )
        )
    return EvalReport(
        config=raw["config"],
        dataset=raw["dataset"],
        started_ts_unix_ms=raw["started_ts_unix_ms"],
        ended_ts_unix_ms=raw["ended_ts_unix_ms"],
        pass_threshold=raw["pass_threshold"],
        rows=rows,
        warnings=list(raw.get("warnings", [])),
        path=path,
    )


def load_report(path: Path | str) -> EvalReport:
    path = Path(path)
    return report_from_yaml_dict(load_yaml(path), path=path)


# -- execution ------------------------------------------------------------------


def _now_ms() -> int:
    return int(time.time() * 1000)


def _run_one_row(
    row_id: str,
    row_input: Any,
    dataset: Dataset,
    config: EvaluationConfig,
    store: TraceStore,
    trace_addr: str,
    working_dir: Path,
) -> RowResult:
    run_id = str(uuid.uuid4())
    env = dict(os.environ)
    env.update(config.run_command.env)
    env.update(
        {
            "AIT_DATAPOINT_INPUT": compact_json(row_input),
            "AIT_TRACE_ADDR": trace_addr,
            "AIT_RUN_ID": run_id,
        }
    )
    started = time.monotonic()
    result = RowResult(id=row_id, status="ok")
    timed_out = False
    try:
        proc = subprocess.Popen(
            config.run_command.argv,
            cwd=str(working_dir),
            env=env,
            stdout=subprocess.PIPE,
            stderr=subprocess.PIPE,
        )
    except OSError as exc:
        result.status = "run_error"
        result.error = f"failed to start run command: {exc}"
        result.wall_ms = int((time.monotonic() - started) * 1000)
        return result
    try:
        _, stderr = proc.communicate(timeout=config.timeout_s)
    except subprocess.TimeoutExpired:
        timed_out = True
        proc.terminate()
        try:
            _, stderr = proc.communicate(timeout=2)
        except subprocess.TimeoutExpired:
            proc.kill()
            _, stderr = proc.communicate()
    result.wall_ms = int((time.monotonic() - started) * 1000)

    # the client's socket closes with the process; give the server a short
    # grace period to finalize the session before reading the trace
    grace = time.monotonic() + _TRACE_GRACE_S
    while run_id in store.open_run_ids and time.monotonic() < grace:
        time.sleep(0.01)

    if store.trace_path(run_id).exists():
        result.trace_ref = run_id
        try:
            trace = store.get(run_id)
        except Exception as exc:  # unreadable trace: row fails, run continues
            trace = None
            result.status = "run_error"
            result.error = f"trace unreadable: {exc}"
    else:
        trace = None

    if trace is not None:
        result.usage = trace.total_usage

    stderr_tail = (stderr or b"").decode("utf-8", errors="replace")[-_STDERR_TAIL:]
    if timed_out:
        if trace is not None:
            result.status = "timeout"
            result.error = f"run command exceeded timeout of {config.timeout_s}s"
        elif result.status == "ok":
            # a traceless timeout cannot satisfy "non-run_error rows have a
            # loadable trace", so it is reported as a run failure
            result.status = "run_error"
            result.error = (
                f"run command exceeded timeout of {config.timeout_s}s"
                " and no trace was received"
            )
        return result
    if result.status == "run_error":
        return result
    if proc.returncode != 0:
        result.status = "run_error"
        result.error = (
            f"run command exited with code {proc.returncode}; stderr: {stderr_tail}"
        )
        return result
    if trace is None:
        result.status = "run_error"
        result.error = (
            "run command completed but no trace was received"
            " (is the agent instrumented and pointed at AIT_TRACE_ADDR?)"
        )
        return result

    root_output = trace.root.output if trace.root is not None else None
    try:
        result.generated_output = extract(dataset.output_path, root_output)
    except ExtractionError as exc:
        result.status = "extract_error"
        result.error = f"output_path {dataset.output_path}: {exc}"
        return result

    for spec in config.evaluators:
        try:
            score = run_evaluator(spec, row_input, result.generated_output, _reference_for(dataset, row_id))
        except EvaluatorError as exc:
            result.evaluator_errors[spec.name] = str(exc)
            continue
        entry: dict[str, Any] = {"value": score.value}
        if score.explanation is not None:
            entry["explanation"] = score.explanation
        result.scores[spec.name] = entry
    if result.evaluator_errors:
        result.status = "evaluator_error"
    return result


def _reference_for(dataset: Dataset, row_id: str) -> Any:
    for row in dataset.rows:
        if row.id == row_id:
            return row.reference_output
    raise KeyError(row_id)


def run_evaluation(
    config: EvaluationConfig,
    project: ProjectConfig,
    store: Optional[TraceStore] = None,
    trace_addr: Optional[str] = None,
    progress: Optional[Callable[[RowResult], None]] = None,
) -> EvalReport:
    """Execute config against its dataset; persists and returns the report.

    Without an explicit store/address an in-process ingest server is
    started on an ephemeral port for the duration of the run.
    """
    dataset = DatasetStore(project.datasets_dir).load(config.dataset)
    own_server: Optional[IngestServer] = None
    if store is None:
        store = TraceStore(project.data_path)
    if trace_addr is None:
        own_server = IngestServer(store, port=0)
        own_server.start()
        trace_addr = own_server.address
    working_dir = Path(config.run_command.working_dir or project.root)
    threshold = config.pass_threshold if config.pass_threshold is not None else project.pass_threshold

    started_ts = _now_ms()
    try:
        if config.parallelism == 1:
            rows = []
            for row in dataset.rows:
                result = _run_one_row(
                    row.id, row.input, dataset, config, store, trace_addr, working_dir
                )
                if progress is not None:
                    progress(result)
                rows.append(result)
        else:
            def work(row):  # noqa: ANN001
                result = _run_one_row(
                    row.id, row.input, dataset, config, store, trace_addr, working_dir
                )
                if progress is not None:
                    progress(result)
                return result

            with concurrent.futures.ThreadPoolExecutor(max_workers=config.parallelism) as pool:
                rows = list(pool.map(work, dataset.rows))
    finally:
        if own_server is not None:
            own_server.stop()
    ended_ts = _now_ms()

    report = EvalReport(
        config=config.name,
        dataset=config.dataset,
        started_ts_unix_ms=started_ts,
        ended_ts_unix_ms=ended_ts,
        pass_threshold=threshold,
        rows=rows,
        warnings=_heuristic_warnings(dataset, rows),
    )
    report.path = _save_report(report, project)
    return report


def _heuristic_warnings(dataset: Dataset, rows: list[RowResult]) -> list[str]:
    produced = [row for row in rows if row.has_output]
    if len(produced) < 2:
        return []
    distinct_inputs = {compact_json(_input_for(dataset, row.id)) for row in produced}
    distinct_outputs = {compact_json(row.generated_output) for row in produced}
    if len(distinct_inputs) >= 2 and len(distinct_outputs) == 1:
        return [
            f"all {len(produced)} generated outputs are identical despite"
            f" {len(distinct_inputs)} distinct inputs; the run command may be"
            " ignoring AIT_DATAPOINT_INPUT"
        ]
    return []


def _input_for(dataset: Dataset, row_id: str) -> Any:
    for row in dataset.rows:
        if row.id == row_id:
            return row.input
    raise KeyError(row_id)


def _save_report(report: EvalReport, project: ProjectConfig) -> Path:
    runs_dir = project.evals_dir / "runs"
    stamp = time.strftime("%Y%m%d-%H%M%S", time.localtime(report.started_ts_unix_ms / 1000))
    path = runs_dir / f"{report.config}-{stamp}.yaml"
    counter = 2
    while path.exists():
        path = runs_dir / f"{report.config}-{stamp}-{counter}.yaml"
        counter += 1
    atomic_write(path, dump_yaml(report.to_yaml_dict()))
    return path


# -- rendering -------------------------------------------------------------------


def render_report(report: EvalReport, format: str = "table") -> bytes:
    if format == "table":
        return _render_table(report).encode("utf-8")
    if format == "json":
        return (json.dumps(report.to_yaml_dict(), indent=2, ensure_ascii=False) + "\n").encode("utf-8")
    if format == "junit":
        return _render_junit(report)
    raise EvalError(f"unknown report format {format!r} (expected table, json, or junit)")


def _render_table(report: EvalReport) -> str:
    evaluator_names = sorted({name for row in report.rows for name in row.scores})
    headers = ["", "id", "status"] + evaluator_names + ["tokens", "wall_ms"]
    table_rows = []
    for row in report.rows:
        glyph = "✓" if report.row_passes(row) else "✗"
        cells = [glyph, row.id, row.status]
        for name in evaluator_names:
            score = row.scores.get(name)
            cells.append(f"{score['value']:.2f}" if score else "-")
        cells.append(str(row.usage.total_tokens))
        cells.append(str(row.wall_ms))
        table_rows.append(cells)
    widths = [
        max(len(headers[i]), *(len(r[i]) for r in table_rows)) if table_rows else len(headers[i])
        for i in range(len(headers))
    ]
    lines = [
        "  ".join(h.ljust(w) for h, w in zip(headers, widths)).rstrip(),
        "  ".join("-" * w for w in widths),
    ]
    for cells in table_rows:
        lines.append("  ".join(c.ljust(w) for c, w in zip(cells, widths)).rstrip())
    passed = report.passed_count
    failed = len(report.rows) - passed
    footer = f"{passed} passed, {failed} failed"
    means = report.means
    for name in sorted(means):
        footer += f", mean {name} {means[name]:.2f}"
    lines.append("")
    lines.append(footer)
    for warning in report.warnings:
        lines.append(f"warning: {warning}")
    return "\n".join(lines) + "\n"


def _render_junit(report: EvalReport) -> bytes:
    """JUnit XML: one testcase per datapoint, failures vs errors split."""
    suites = ET.Element("testsuites")
    duration_s = max(report.ended_ts_unix_ms - report.started_ts_unix_ms, 0) / 1000
    failures = sum(
        1 for row in report.rows if row.status == "ok" and not report.row_passes(row)
    )
    errors = sum(1 for row in report.rows if row.status != "ok")
    suite = ET.SubElement(
        suites,
        "testsuite",
        {
            "name": report.config,
            "tests": str(len(report.rows)),
            "failures": str(failures),
            "errors": str(errors),
            "skipped": "0",
            "time": f"{duration_s:.3f}",
            "timestamp": time.strftime(
                "%Y-%m-%dT%H:%M:%S", time.localtime(report.started_ts_unix_ms / 1000)
            ),
        },
    )
    for row in report.rows:
        case = ET.SubElement(
            suite,
            "testcase",
            {
                "name": row.id,
                "classname": f"{report.config}.{report.dataset}",
                "time": f"{row.wall_ms / 1000:.3f}",
            },
        )
        if row.status != "ok":
            error = ET.SubElement(
                case, "error", {"message": row.error or row.status, "type": row.status}
            )
            if row.evaluator_errors:
                error.text = "\n".join(
                    f"{name}: {message}" for name, message in row.evaluator_errors.items()
                )
        elif not report.row_passes(row):
            failing = {
                name: score["value"]
                for name, score in row.scores.items()
                if score["value"] < report.pass_threshold
            }
            ET.SubElement(
                case,
                "failure",
                {
                    "message": "score below pass threshold "
                    + f"{report.pass_threshold:g}: "
                    + ", ".join(f"{n}={v:.2f}" for n, v in sorted(failing.items())),
                    "type": "scoreBelowThreshold",
                },
            )
    ET.indent(suites)
    return ET.tostring(suites, encoding="utf-8", xml_declaration=True) + b"\n"
