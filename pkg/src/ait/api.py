"""Local HTTP and WebSocket API over the trace store, datasets, and evals.

All endpoints are JSON; errors use ``{"error": code, "message": ...}``
with a matching HTTP status.  The API binds the same module operations
as the CLI, so both surfaces produce identical persisted files.  The
web UI is served as static assets when a built bundle is present.
"""

from __future__ import annotations

import asyncio
import os
import queue
import threading
import uuid
from pathlib import Path
from typing import Any, Optional

from fastapi import FastAPI, WebSocket, WebSocketDisconnect
from fastapi.responses import JSONResponse
from starlette.concurrency import run_in_threadpool
from starlette.staticfiles import StaticFiles

from .config import ProjectConfig
from .datasets import (
    DatasetError,
    DatasetNotFoundError,
    DatasetSchemaError,
    DatasetStore,
    DuplicateDatasetError,
    PromotionError,
)
from .evals import EvalConfigStore, EvalError, load_report, run_evaluation
from .jsonpath import PathError
from .store import RunNotFoundError, TraceStore
from .trace import compact_json, pretty_view, trace_to_json


def _error(status: int, code: str, message: str) -> JSONResponse:
    return JSONResponse({"error": code, "message": message}, status_code=status)


class _EvalRuns:
    """In-memory registry of API-launched evaluation runs."""

    def __init__(self) -> None:
        self._lock = threading.Lock()
        self._runs: dict[str, dict[str, Any]] = {}

    def create(self, config_name: str) -> str:
        eval_run_id = f"{config_name}-{uuid.uuid4().hex[:8]}"
        with self._lock:
            self._runs[eval_run_id] = {"status": "running", "config": config_name}
        return eval_run_id

    def finish(self, eval_run_id: str, report_path: Path) -> None:
        with self._lock:
            self._runs[eval_run_id].update(
                {"status": "done", "report_path": str(report_path)}
            )

    def fail(self, eval_run_id: str, message: str) -> None:
        with self._lock:
            self._runs[eval_run_id].update({"status": "error", "message": message})

    def get(self, eval_run_id: str) -> Optional[dict[str, Any]]:
        with self._lock:
            entry = self._runs.get(eval_run_id)
            return dict(entry) if entry is not None else None


def _dataset_summary(store: DatasetStore, name: str) -> dict[str, Any]:
    dataset = store.load(name)
    return {
        "name": dataset.name,
        "input_path": dataset.input_path.render(),
        "output_path": dataset.output_path.render(),
        "row_count": len(dataset.rows),
    }


def build_app(
    project: ProjectConfig,
    store: Optional[TraceStore] = None,
    ui_dir: Optional[Path] = None,
) -> FastAPI:
    store = store or TraceStore(project.data_path)
    datasets = DatasetStore(project.datasets_dir)
    evals = EvalConfigStore(project.evals_dir)
    eval_runs = _EvalRuns()
    app = FastAPI(title="ait", docs_url=None, redoc_url=None)

    # -- runs ---------------------------------------------------------------

    @app.get("/api/runs")
    def get_runs() -> Any:
        return {"runs": store.list_runs()}

    @app.get("/api/runs/{run_id}")
    def get_run(run_id: str) -> Any:
        try:
            trace = store.get(run_id)
        except RunNotFoundError:
            return _error(404, "not_found", f"no trace for run {run_id!r}")
        doc = trace_to_json(trace)
        doc["pretty"] = [line.to_json() for line in pretty_view(trace)]
        return doc

    # -- datasets -----------------------------------------------------------

    @app.get("/api/datasets")
    def get_datasets() -> Any:
        return {"datasets": [_dataset_summary(datasets, n) for n in datasets.list_names()]}

    @app.post("/api/datasets")
    def post_dataset(body: dict) -> Any:
        for key in ("name", "input_path", "output_path"):
            if not isinstance(body.get(key), str):
                return _error(400, "bad_request", f"body needs string {key!r}")
        try:
            dataset = datasets.create(body["name"], body["input_path"], body["output_path"])
        except DuplicateDatasetError as exc:
            return _error(409, "duplicate", str(exc))
        except (DatasetError, PathError) as exc:
            return _error(400, "bad_request", str(exc))
        return JSONResponse(
            {"name": dataset.name, "row_count": 0}, status_code=201
        )

    @app.get("/api/datasets/{name}")
    def get_dataset(name: str) -> Any:
        try:
            dataset = datasets.load(name)
        except DatasetNotFoundError as exc:
            return _error(404, "not_found", str(exc))
        except DatasetSchemaError as exc:
            return _error(500, "unreadable", str(exc))
        return dataset.to_yaml_dict()

    @app.post("/api/datasets/{name}/rows")
    def post_row(name: str, body: dict) -> Any:
        try:
            dataset = datasets.load(name)
        except DatasetNotFoundError as exc:
            return _error(404, "not_found", str(exc))
        note = body.get("note")
        if note is not None and not isinstance(note, str):
            return _error(400, "bad_request", "note must be a string")
        try:
            if "from_trace" in body:
                try:
                    trace = store.get(body["from_trace"])
                except RunNotFoundError:
                    return _error(404, "not_found", f"no trace for run {body['from_trace']!r}")
                kwargs: dict[str, Any] = {"note": note}
                if "reference" in body:
                    kwargs["reference_override"] = body["reference"]
                row = datasets.add_from_trace(dataset, trace, **kwargs)
            else:
                if "input" not in body or "reference" not in body:
                    return _error(
                        400, "bad_request", "body needs from_trace, or input and reference"
                    )
                row = datasets.add_manual(dataset, body["input"], body["reference"], note=note)
        except PromotionError as exc:
            return _error(422, "promotion_failed", str(exc))
        except DatasetError as exc:
            return _error(400, "bad_request", str(exc))
        return JSONResponse(row.to_yaml_dict(), status_code=201)

    # -- evals --------------------------------------------------------------

    @app.get("/api/evals")
    def get_evals() -> Any:
        out = []
        for name in evals.list_names():
            try:
                config = evals.load(name)
            except EvalError:
                continue
            out.append(
                {
                    "name": config.name,
                    "dataset": config.dataset,
                    "evaluators": [e.name for e in config.evaluators],
                    "reports": [p.stem for p in evals.list_reports(name)],
                }
            )
        return {"evals": out}

    @app.post("/api/evals/{name}/run")
    def post_eval_run(name: str) -> Any:
        try:
            config = evals.load(name)
        except EvalError as exc:
            return _error(404, "not_found", str(exc))
        eval_run_id = eval_runs.create(name)

        def progress(row) -> None:  # noqa: ANN001
            store.hub.publish(
                {
                    "type": "eval_progress",
                    "eval_run_id": eval_run_id,
                    "row": row.to_yaml_dict(),
                }
            )

        def work() -> None:
            try:
                report = run_evaluation(config, project, store=store, progress=progress)
            except Exception as exc:  # surfaced via the registry and WS
                eval_runs.fail(eval_run_id, str(exc))
                store.hub.publish(
                    {"type": "eval_finished", "eval_run_id": eval_run_id, "error": str(exc)}
                )
                return
            eval_runs.finish(eval_run_id, report.path)
            store.hub.publish(
                {
                    "type": "eval_finished",
                    "eval_run_id": eval_run_id,
                    "report": report.path.stem,
                }
            )

        threading.Thread(target=work, daemon=True).start()
        return JSONResponse({"eval_run_id": eval_run_id}, status_code=202)

    @app.get("/api/evals/runs/{eval_run_id}")
    def get_eval_run(eval_run_id: str) -> Any:
        entry = eval_runs.get(eval_run_id)
        if entry is not None:
            if entry["status"] == "running":
                return {"status": "running", "config": entry["config"]}
            if entry["status"] == "error":
                return _error(500, "eval_failed", entry["message"])
            report = load_report(Path(entry["report_path"]))
            return {"status": "done", "report": report.to_yaml_dict()}
        # past runs survive restarts as report files named by their stem
        path = evals.runs_dir / f"{eval_run_id}.yaml"
        if path.is_file():
            return {"status": "done", "report": load_report(path).to_yaml_dict()}
        return _error(404, "not_found", f"no evaluation run {eval_run_id!r}")

    # -- live ---------------------------------------------------------------

    @app.websocket("/api/live")
    async def ws_live(ws: WebSocket) -> None:
        await ws.accept()
        sub = store.subscribe(run_filter=ws.query_params.get("run"))
        stop = asyncio.Event()

        async def reader() -> None:
            try:
                while True:
                    await ws.receive_text()  # client messages are ignored
            except WebSocketDisconnect:
                stop.set()

        reader_task = asyncio.create_task(reader())
        try:
            while not stop.is_set():
                try:
                    message = await run_in_threadpool(sub.get, 0.25)
                except queue.Empty:
                    if sub.dropped:
                        break
                    continue
                await ws.send_text(compact_json(message))
        except (WebSocketDisconnect, RuntimeError):
            pass
        finally:
            reader_task.cancel()
            store.hub.unsubscribe(sub)

    # -- static UI ------------------------------------------------------------

    if ui_dir is None:
        env_dir = os.environ.get("AIT_UI_DIR")
        if env_dir:
            ui_dir = Path(env_dir)
        else:
            candidate = project.root / "frontend" / "dist"
            ui_dir = candidate if candidate.is_dir() else None
    if ui_dir is not None and Path(ui_dir).is_dir():
        app.mount("/", StaticFiles(directory=str(ui_dir), html=True), name="ui")
    else:

        @app.get("/")
        def index() -> Any:
            return {
                "service": "ait",
                "endpoints": [
                    "/api/runs",
                    "/api/runs/{id}",
                    "/api/datasets",
                    "/api/datasets/{name}",
                    "/api/datasets/{name}/rows",
                    "/api/evals",
                    "/api/evals/{name}/run",
                    "/api/evals/runs/{id}",
                    "/api/live (websocket)",
                ],
            }

    return app
