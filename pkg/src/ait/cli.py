"""Command-line surface.

Subcommands bind the underlying modules thinly: detect, serve, traces,
dataset, eval, emit, mock-judge.  Exit codes: 0 success or all-pass,
1 domain failure (eval fail, detection no, bind error), 2 usage and
not-found errors.  Heavy imports stay inside the command functions so
`ait emit` starts fast.
"""

from __future__ import annotations

import argparse
import json
import re
import sys
import threading
from pathlib import Path
from typing import Any, Optional

SOURCE_EXTENSIONS = {".py", ".pyi", ".ipynb", ".js", ".jsx", ".ts", ".tsx", ".mjs", ".cjs"}
SKIP_DIRS = {
    ".git", ".hg", ".svn", "node_modules", "__pycache__", ".venv", "venv",
    "env", ".tox", ".mypy_cache", ".pytest_cache", "site-packages", "dist",
    "build", ".ait",
}


def _fail(message: str, code: int = 2) -> int:
    print(f"error: {message}", file=sys.stderr)
    return code


def _project(args: argparse.Namespace):
    from .config import ProjectConfig

    project = ProjectConfig.load(args.root)
    if getattr(args, "data_dir", None):
        project.data_dir = Path(args.data_dir)
    return project


def _print_table(headers: list[str], rows: list[list[str]]) -> None:
    widths = [
        max(len(headers[i]), *(len(r[i]) for r in rows)) if rows else len(headers[i])
        for i in range(len(headers))
    ]
    print("  ".join(h.ljust(w) for h, w in zip(headers, widths)).rstrip())
    print("  ".join("-" * w for w in widths))
    for row in rows:
        print("  ".join(c.ljust(w) for c, w in zip(row, widths)).rstrip())


# -- detect ----------------------------------------------------------------------


def _marker_pattern(markers: list[str]) -> re.Pattern:
    # import/from statements plus quoted module specifiers (JS imports).
    # Matches inside comments and strings too; accepted v1 limitation.
    alts = "|".join(re.escape(m) for m in markers)
    return re.compile(
        rf"(?:\b(?:import|from)\s+(?:{alts})\b)|(?:['\"](?:{alts})(?:[./'\"]|$))",
        re.MULTILINE,
    )


def iter_source_files(root: Path):
    for path in sorted(root.rglob("*")):
        if not path.is_file() or path.suffix not in SOURCE_EXTENSIONS:
            continue
        if any(part in SKIP_DIRS for part in path.relative_to(root).parts):
            continue
        yield path


def cmd_detect(args: argparse.Namespace) -> int:
    project = _project(args)
    root = Path(args.path).resolve()
    if not root.is_dir():
        return _fail(f"{root} is not a directory")
    pattern = _marker_pattern(project.framework_markers)
    matched: list[Path] = []
    for path in iter_source_files(root):
        try:
            text = path.read_text(encoding="utf-8", errors="replace")
        except OSError:
            continue
        if pattern.search(text):
            matched.append(path)
    for path in matched:
        print(path.relative_to(root))
    verdict = "yes" if matched else "no"
    print(f"AI-project: {verdict}")
    return 0 if matched else 1


# -- serve -----------------------------------------------------------------------


def cmd_serve(args: argparse.Namespace) -> int:
    from .api import build_app
    from .server import IngestServer
    from .store import TraceStore

    import uvicorn

    project = _project(args)
    serve_port = project.serve_port if args.port is None else args.port
    http_port = project.http_port if args.http_port is None else args.http_port

    store = TraceStore(project.data_path)
    ingest = IngestServer(store, host=args.host, port=serve_port)
    try:
        ingest.start()
    except OSError as exc:
        return _fail(f"cannot bind ingest port {serve_port}: {exc}", 1)

    app = build_app(project, store)
    config = uvicorn.Config(
        app, host=args.host, port=http_port, log_level="warning", access_log=False
    )
    server = uvicorn.Server(config)
    # uvicorn only installs signal handlers on the main thread; running it
    # on a worker thread keeps KeyboardInterrupt in our control
    http_thread = threading.Thread(target=server.run, daemon=True)
    http_thread.start()
    try:
        import time

        while not server.started and http_thread.is_alive():
            time.sleep(0.02)
        if not http_thread.is_alive():
            return _fail(f"cannot bind http port {http_port}", 1)
        bound = server.servers[0].sockets[0].getsockname()
        print(f"trace ingest listening on {ingest.address}")
        print(f"http api listening on http://{bound[0]}:{bound[1]}")
        print(f"data dir: {project.data_path}")
        sys.stdout.flush()
        while http_thread.is_alive():
            http_thread.join(0.2)
        return 0
    except KeyboardInterrupt:
        print("shutting down", file=sys.stderr)
        return 0
    finally:
        server.should_exit = True
        http_thread.join(5)
        ingest.stop()


# -- traces ----------------------------------------------------------------------


def _format_ts(ms: Optional[int]) -> str:
    if not ms:
        return "-"
    import datetime

    return datetime.datetime.fromtimestamp(ms / 1000).strftime("%Y-%m-%d %H:%M:%S")


def cmd_traces_list(args: argparse.Namespace) -> int:
    from .store import TraceStore

    store = TraceStore(_project(args).data_path)
    rows = [
        [
            entry["run_id"],
            entry["state"],
            _format_ts(entry.get("started_ts_unix_ms")),
            str(entry.get("event_count", 0)),
            str(entry.get("span_count", 0)),
            str(entry.get("total_tokens", 0)),
            str(entry.get("duration_ms", 0)),
        ]
        for entry in store.list_runs()
    ]
    _print_table(
        ["run_id", "state", "started", "events", "spans", "tokens", "ms"], rows
    )
    return 0


def _load_trace(args: argparse.Namespace):
    from .store import RunNotFoundError, TraceStore

    store = TraceStore(_project(args).data_path)
    try:
        return store.get(args.run_id)
    except RunNotFoundError:
        return None


def cmd_traces_show(args: argparse.Namespace) -> int:
    from .trace import pretty_view, trace_to_json

    trace = _load_trace(args)
    if trace is None:
        return _fail(f"no trace for run {args.run_id!r}")
    if args.raw:
        print(json.dumps(trace_to_json(trace), indent=2, ensure_ascii=False))
        return 0
    if args.graph:
        if trace.graph is None:
            print("no graph recorded")
            return 0
        print(graph_dot(trace.graph))
        return 0
    print(f"run {trace.run_id}  state={trace.state}  events={trace.event_count}")
    for line in pretty_view(trace):
        indent = "  " * line.depth
        cols = [f"{indent}{line.headline}"]
        if line.detail:
            cols.append(line.detail)
        if line.duration_ms is not None:
            cols.append(f"{line.duration_ms} ms")
        if line.usage is not None:
            cols.append(f"{line.usage.total_tokens} tok")
        print("  | ".join(cols))
    for anomaly in trace.anomalies:
        print(f"anomaly: {anomaly}")
    return 0


def graph_dot(graph) -> str:
    """DOT rendering of a recorded agent graph, for external tools."""

    def quote(text: str) -> str:
        return '"' + text.replace("\\", "\\\\").replace('"', '\\"') + '"'

    lines = ["digraph agent {"]
    for node in graph.nodes:
        lines.append(f"  {quote(node.id)} [label={quote(node.label)}];")
    for edge in graph.edges:
        attrs = f" [label={quote(edge.label)}]" if edge.label is not None else ""
        lines.append(f"  {quote(edge.src)} -> {quote(edge.dst)}{attrs};")
    lines.append("}")
    return "\n".join(lines)


def cmd_traces_replay(args: argparse.Namespace) -> int:
    from .server import ReplayError, replay
    from .store import DuplicateRunError, TraceStore

    store = TraceStore(_project(args).data_path)
    try:
        run_id = replay(Path(args.file), store)
    except FileNotFoundError:
        return _fail(f"no such file: {args.file}")
    except DuplicateRunError as exc:
        return _fail(str(exc), 1)
    except ReplayError as exc:
        return _fail(str(exc), 1)
    trace = store.get(run_id)
    print(f"replayed {run_id}  state={trace.state}  events={trace.event_count}")
    return 0


# -- dataset ---------------------------------------------------------------------


def _dataset_store(args: argparse.Namespace):
    from .datasets import DatasetStore

    return DatasetStore(_project(args).datasets_dir)


def cmd_dataset_create(args: argparse.Namespace) -> int:
    from .datasets import DatasetError
    from .jsonpath import PathError

    try:
        dataset = _dataset_store(args).create(args.name, args.input_path, args.output_path)
    except (DatasetError, PathError) as exc:
        return _fail(str(exc))
    print(f"created dataset {dataset.name}")
    return 0


def cmd_dataset_add(args: argparse.Namespace) -> int:
    from .datasets import DatasetError
    from .store import RunNotFoundError, TraceStore

    store = _dataset_store(args)
    try:
        dataset = store.load(args.name)
    except DatasetError as exc:
        return _fail(str(exc))
    try:
        if args.from_trace is not None:
            trace_store = TraceStore(_project(args).data_path)
            try:
                trace = trace_store.get(args.from_trace)
            except RunNotFoundError:
                return _fail(f"no trace for run {args.from_trace!r}")
            kwargs: dict[str, Any] = {}
            if args.reference is not None:
                kwargs["reference_override"] = json.loads(args.reference)
            row = store.add_from_trace(dataset, trace, note=args.note, **kwargs)
        else:
            if args.input is None or args.reference is None:
                return _fail("--input and --reference are required without --from-trace")
            row = store.add_manual(
                dataset,
                json.loads(args.input),
                json.loads(args.reference),
                note=args.note,
            )
    except json.JSONDecodeError as exc:
        return _fail(f"argument is not valid JSON: {exc}")
    except DatasetError as exc:
        return _fail(str(exc), 1)
    print(f"added {row.id} to {dataset.name}")
    return 0


def cmd_dataset_list(args: argparse.Namespace) -> int:
    store = _dataset_store(args)
    for name in store.list_names():
        dataset = store.load(name)
        print(f"{name}  rows={len(dataset.rows)}")
    return 0


def cmd_dataset_show(args: argparse.Namespace) -> int:
    from .datasets import DatasetError

    store = _dataset_store(args)
    try:
        store.load(args.name)  # validate before dumping
    except DatasetError as exc:
        return _fail(str(exc))
    sys.stdout.write(store.path_for(args.name).read_text(encoding="utf-8"))
    return 0


# -- eval ------------------------------------------------------------------------


def cmd_eval_run(args: argparse.Namespace) -> int:
    from .datasets import DatasetError
    from .evals import EvalConfigStore, EvalError, render_report, run_evaluation

    project = _project(args)
    store = EvalConfigStore(project.evals_dir)
    try:
        config = store.load(args.config)
    except EvalError as exc:
        return _fail(str(exc))

    def progress(row) -> None:  # noqa: ANN001
        scores = "  ".join(
            f"{name}={entry['value']:.2f}" for name, entry in sorted(row.scores.items())
        )
        status = "ok" if row.status == "ok" else row.status.upper()
        print(f"{status:>16}  {row.id}  {scores}  ({row.wall_ms} ms)")
        sys.stdout.flush()

    try:
        report = run_evaluation(config, project, progress=progress)
    except DatasetError as exc:
        return _fail(str(exc))
    print()
    sys.stdout.write(render_report(report, "table").decode("utf-8"))
    print(f"report: {report.path}")
    all_pass = report.passed_count == len(report.rows)
    return 0 if all_pass else 1


def cmd_eval_report(args: argparse.Namespace) -> int:
    from .evals import EvalConfigError, EvalError, load_report, render_report

    path = Path(args.file)
    if not path.is_file():
        return _fail(f"no such report file: {path}")
    try:
        report = load_report(path)
    except (EvalError, EvalConfigError) as exc:
        return _fail(f"unreadable report: {exc}", 1)
    try:
        sys.stdout.buffer.write(render_report(report, args.format))
    except EvalError as exc:
        return _fail(str(exc))
    sys.stdout.flush()
    return 0


def cmd_eval_list(args: argparse.Namespace) -> int:
    from .evals import EvalConfigStore

    project = _project(args)
    store = EvalConfigStore(project.evals_dir)
    for name in store.list_names():
        print(name)
    return 0


# -- emit / mock-judge -------------------------------------------------------------


def cmd_emit(args: argparse.Namespace) -> int:
    from . import emit

    argv = ["--transform", args.transform]
    if args.with_tool is not None:
        argv += ["--with-tool", args.with_tool]
    return emit.main(argv)


def cmd_mock_judge(args: argparse.Namespace) -> int:
    from .mockjudge import MockJudgeServer

    server = MockJudgeServer(port=args.port)
    server.start()
    print(f"mock judge listening on {server.url}")
    sys.stdout.flush()
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.stop()
    return 0


# -- parser -----------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ait", description="agent trace capture, datasets, and evaluation"
    )
    parser.add_argument(
        "-C", "--root", default=None, help="project root (default: current directory)"
    )
    parser.add_argument("--data-dir", default=None, help="override the data directory")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("detect", help="scan a project for agent-framework imports")
    p.add_argument("path", nargs="?", default=".")
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("serve", help="run the trace ingest and HTTP API servers")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=None, help="ingest TCP port")
    p.add_argument("--http-port", type=int, default=None, help="HTTP API port")
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("traces", help="inspect recorded traces")
    tsub = p.add_subparsers(dest="traces_command", required=True)
    t = tsub.add_parser("list", help="list recorded runs")
    t.set_defaults(func=cmd_traces_list)
    t = tsub.add_parser("show", help="render one trace")
    t.add_argument("run_id")
    group = t.add_mutually_exclusive_group()
    group.add_argument("--pretty", action="store_true", help="condensed tree (default)")
    group.add_argument("--raw", action="store_true", help="full JSON")
    group.add_argument("--graph", action="store_true", help="agent graph as DOT")
    t.set_defaults(func=cmd_traces_show)
    t = tsub.add_parser("replay", help="replay a recorded .trace.ndjson file")
    t.add_argument("file")
    t.set_defaults(func=cmd_traces_replay)

    p = sub.add_parser("dataset", help="manage datasets")
    dsub = p.add_subparsers(dest="dataset_command", required=True)
    d = dsub.add_parser("create", help="create an empty dataset")
    d.add_argument("name")
    d.add_argument("--input-path", required=True, help="JSON path into the root input")
    d.add_argument("--output-path", required=True, help="JSON path into the root output")
    d.set_defaults(func=cmd_dataset_create)
    d = dsub.add_parser("add", help="add a datapoint")
    d.add_argument("name")
    d.add_argument("--from-trace", metavar="RUN_ID", default=None)
    d.add_argument("--input", default=None, help="input JSON (manual row)")
    d.add_argument("--reference", default=None, help="reference output JSON")
    d.add_argument("--note", default=None)
    d.set_defaults(func=cmd_dataset_add)
    d = dsub.add_parser("list", help="list datasets")
    d.set_defaults(func=cmd_dataset_list)
    d = dsub.add_parser("show", help="print a dataset")
    d.add_argument("name")
    d.set_defaults(func=cmd_dataset_show)

    p = sub.add_parser("eval", help="run and inspect evaluations")
    esub = p.add_subparsers(dest="eval_command", required=True)
    e = esub.add_parser("run", help="run an evaluation config")
    e.add_argument("config")
    e.set_defaults(func=cmd_eval_run)
    e = esub.add_parser("report", help="render a stored report")
    e.add_argument("file")
    e.add_argument("--format", choices=["table", "json", "junit"], default="table")
    e.set_defaults(func=cmd_eval_report)
    e = esub.add_parser("list", help="list evaluation configs")
    e.set_defaults(func=cmd_eval_list)

    p = sub.add_parser("emit", help="run the built-in fake agent once")
    p.add_argument("--transform", default="echo", help="upper, echo, or const:<json>")
    p.add_argument("--with-tool", metavar="NAME", default=None)
    p.set_defaults(func=cmd_emit)

    p = sub.add_parser("mock-judge", help="run the bundled mock judge endpoint")
    p.add_argument("--port", type=int, default=0)
    p.set_defaults(func=cmd_mock_judge)

    return parser


def main(argv: Optional[list[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
