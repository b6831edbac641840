// Application shell: one store holding ViewState plus fetched API
// data, pure view functions over that pair, and the WS subscription
// that triggers refetches. Rendering is always a full rebuild from
// data, so the screen is a function of the API plus ViewState and
// nothing else.

import { Api, ApiError, LiveSocket, liveUrl } from "./api.js";
import {
  datasetRows,
  datasetTable,
  dialogView,
  openDialog,
  selectDataset,
  submitBody,
  type DialogState,
} from "./datasets.js";
import { fmtTimestamp, fmtTokens } from "./format.js";
import { graphView } from "./graph.js";
import {
  applyEvalMessage,
  newProgress,
  progressView,
  resultsTable,
  type EvalProgress,
} from "./results.js";
import { traceTree } from "./tree.js";
import {
  initialViewState,
  type DatasetDoc,
  type DatasetSummary,
  type EvalSummary,
  type ReportDoc,
  type RunDoc,
  type RunSummary,
  type ViewMode,
  type ViewState,
  type WsMessage,
} from "./types.js";
import { h, replaceChildren, type VNode } from "./vdom.js";

export interface AppData {
  runs: RunSummary[];
  runDoc: RunDoc | null;
  datasets: DatasetSummary[];
  datasetDoc: DatasetDoc | null;
  evals: EvalSummary[];
  report: ReportDoc | null;
  progress: EvalProgress | null;
  dialog: DialogState | null;
  notice: string | null;
}

export function emptyData(): AppData {
  return {
    runs: [],
    runDoc: null,
    datasets: [],
    datasetDoc: null,
    evals: [],
    report: null,
    progress: null,
    dialog: null,
    notice: null,
  };
}

// --- pure views -------------------------------------------------------

export function runsTable(
  runs: RunSummary[],
  selected: string | null,
  onSelect?: (runId: string) => void,
): VNode {
  const head = h("tr", {}, [
    h("th", {}, ["run"]),
    h("th", {}, ["state"]),
    h("th", {}, ["framework"]),
    h("th", {}, ["started"]),
    h("th", {}, ["spans"]),
    h("th", {}, ["events"]),
    h("th", {}, ["tokens"]),
  ]);
  const body = runs.map((run) =>
    h(
      "tr",
      {
        class: `run-row${run.run_id === selected ? " selected" : ""} state-${run.state}`,
        "data-run": run.run_id,
      },
      [
        h("td", { class: "mono" }, [run.run_id]),
        h("td", { class: "state" }, [run.state]),
        h("td", {}, [run.framework]),
        h("td", { class: "started" }, [fmtTimestamp(run.started_ts_unix_ms)]),
        h("td", { class: "span-count" }, [String(run.span_count)]),
        h("td", { class: "event-count" }, [String(run.event_count)]),
        h("td", { class: "tokens" }, [fmtTokens(run.total_tokens)]),
      ],
      { click: () => onSelect?.(run.run_id) },
    ),
  );
  return h("table", { class: "runs-table" }, [h("thead", {}, [head]), h("tbody", {}, body)]);
}

export function evalsTable(
  evals: EvalSummary[],
  onRun?: (name: string) => void,
  onReport?: (stem: string) => void,
): VNode {
  const head = h("tr", {}, [
    h("th", {}, ["config"]),
    h("th", {}, ["dataset"]),
    h("th", {}, ["evaluators"]),
    h("th", {}, ["reports"]),
    h("th", {}, [""]),
  ]);
  const body = evals.map((cfg) =>
    h("tr", { class: "eval-config", "data-eval": cfg.name }, [
      h("td", { class: "mono" }, [cfg.name]),
      h("td", { class: "mono" }, [cfg.dataset]),
      h("td", {}, [cfg.evaluators.join(", ")]),
      h(
        "td",
        { class: "reports" },
        cfg.reports.map((stem) =>
          h("button", { class: "report-link mono", "data-report": stem }, [stem], {
            click: () => onReport?.(stem),
          }),
        ),
      ),
      h("td", {}, [
        h("button", { class: "run-eval" }, ["Run"], { click: () => onRun?.(cfg.name) }),
      ]),
    ]),
  );
  return h("table", { class: "evals-table" }, [h("thead", {}, [head]), h("tbody", {}, body)]);
}

export interface Handlers {
  selectScreen: (screen: ViewState["screen"]) => void;
  selectRun: (runId: string) => void;
  setMode: (mode: ViewMode) => void;
  toggleFollow: () => void;
  toggleSpan: (spanId: string) => void;
  openDialog: () => void;
  dialog: {
    select: (name: string) => void;
    inputPath: (text: string) => void;
    outputPath: (text: string) => void;
    reference: (text: string) => void;
    note: (text: string) => void;
    submit: () => void;
    cancel: () => void;
  };
  openDataset: (name: string) => void;
  runEval: (name: string) => void;
  openReport: (stem: string) => void;
  openTrace: (traceRef: string) => void;
}

function navBar(state: ViewState, handlers: Handlers): VNode {
  const tab = (screen: ViewState["screen"], label: string) =>
    h(
      "button",
      { class: `nav-tab${state.screen === screen ? " active" : ""}`, "data-screen": screen },
      [label],
      { click: () => handlers.selectScreen(screen) },
    );
  return h("nav", { class: "topnav" }, [
    h("span", { class: "brand" }, ["ait"]),
    tab("runs", "Runs"),
    tab("datasets", "Datasets"),
    tab("evals", "Evals"),
  ]);
}

function modeTabs(state: ViewState, handlers: Handlers): VNode {
  const tab = (mode: ViewMode, label: string) =>
    h(
      "button",
      { class: `mode-tab${state.viewMode === mode ? " active" : ""}`, "data-mode": mode },
      [label],
      { click: () => handlers.setMode(mode) },
    );
  return h("div", { class: "mode-tabs" }, [
    tab("pretty", "Pretty"),
    tab("raw", "Raw"),
    tab("graph", "Graph"),
    h(
      "button",
      { class: `follow-toggle${state.liveFollow ? " active" : ""}` },
      [state.liveFollow ? "following" : "follow live"],
      { click: () => handlers.toggleFollow() },
    ),
  ]);
}

function runsScreen(state: ViewState, data: AppData, handlers: Handlers): VNode {
  const sidebar = h("aside", { class: "sidebar" }, [
    runsTable(data.runs, state.selectedRun, handlers.selectRun),
  ]);
  let main: VNode;
  if (!data.runDoc) {
    main = h("div", { class: "placeholder" }, ["Select a run to inspect its trace."]);
  } else if (state.viewMode === "graph") {
    main = h("section", { class: "trace-view" }, [
      data.runDoc.graph
        ? graphView(data.runDoc.graph)
        : h("div", { class: "placeholder" }, ["This run announced no graph."]),
    ]);
  } else {
    main = traceTree(data.runDoc, {
      mode: state.viewMode,
      collapsed: state.collapsed,
      onToggle: handlers.toggleSpan,
      onAddToDataset: handlers.openDialog,
    });
  }
  const parts: VNode[] = [
    sidebar,
    h("main", { class: "main" }, [data.runDoc ? modeTabs(state, handlers) : "", main]),
  ];
  if (data.dialog) {
    parts.push(
      h("div", { class: "overlay" }, [
        dialogView(data.dialog, {
          onSelect: handlers.dialog.select,
          onInputPath: handlers.dialog.inputPath,
          onOutputPath: handlers.dialog.outputPath,
          onReference: handlers.dialog.reference,
          onNote: handlers.dialog.note,
          onSubmit: handlers.dialog.submit,
          onCancel: handlers.dialog.cancel,
        }),
      ]),
    );
  }
  return h("div", { class: "screen runs-screen" }, parts);
}

function datasetsScreen(state: ViewState, data: AppData, handlers: Handlers): VNode {
  const parts: VNode[] = [datasetTable(data.datasets, handlers.openDataset)];
  if (data.datasetDoc) {
    parts.push(h("h2", { class: "mono" }, [data.datasetDoc.name]));
    parts.push(datasetRows(data.datasetDoc));
  }
  return h("div", { class: "screen datasets-screen" }, parts);
}

function evalsScreen(state: ViewState, data: AppData, handlers: Handlers): VNode {
  const parts: VNode[] = [evalsTable(data.evals, handlers.runEval, handlers.openReport)];
  if (data.progress && !data.progress.finished) {
    parts.push(progressView(data.progress, null));
  }
  if (data.report) {
    parts.push(h("h2", { class: "mono" }, [data.report.config]));
    parts.push(resultsTable(data.report, handlers.openTrace));
  }
  return h("div", { class: "screen evals-screen" }, parts);
}

export function appView(state: ViewState, data: AppData, handlers: Handlers): VNode {
  let screen: VNode;
  if (state.screen === "runs") screen = runsScreen(state, data, handlers);
  else if (state.screen === "datasets") screen = datasetsScreen(state, data, handlers);
  else screen = evalsScreen(state, data, handlers);
  const parts: VNode[] = [navBar(state, handlers)];
  if (data.notice) parts.push(h("div", { class: "notice" }, [data.notice]));
  parts.push(screen);
  return h("div", { class: "app" }, parts);
}

// --- store + wiring ---------------------------------------------------

export class App {
  state: ViewState = initialViewState();
  data: AppData = emptyData();
  api: Api;
  private root: Element;
  private socket: LiveSocket;
  private refreshTimer: ReturnType<typeof setTimeout> | null = null;

  constructor(root: Element, api: Api = new Api(), wsUrl: string = liveUrl()) {
    this.root = root;
    this.api = api;
    this.socket = new LiveSocket(wsUrl, (msg) => this.onWs(msg));
  }

  async start(): Promise<void> {
    this.socket.start();
    await this.refreshIndexes();
    this.render();
  }

  render(): void {
    replaceChildren(this.root, appView(this.state, this.data, this.handlers()));
  }

  private async refreshIndexes(): Promise<void> {
    try {
      [this.data.runs, this.data.datasets, this.data.evals] = await Promise.all([
        this.api.runs(),
        this.api.datasets(),
        this.api.evals(),
      ]);
      this.data.notice = null;
    } catch (err) {
      this.data.notice = err instanceof Error ? err.message : String(err);
    }
  }

  private async loadRun(runId: string): Promise<void> {
    try {
      this.data.runDoc = await this.api.run(runId);
    } catch (err) {
      // the run may have been pruned; drop the stale selection
      this.state.selectedRun = null;
      this.data.runDoc = null;
      this.data.notice = err instanceof Error ? err.message : String(err);
    }
  }

  /** Coalesces bursts of WS events into one refetch per frame-ish. */
  private scheduleRunRefresh(): void {
    if (this.refreshTimer !== null) return;
    this.refreshTimer = setTimeout(() => {
      this.refreshTimer = null;
      const runId = this.state.selectedRun;
      if (runId === null) return;
      void this.loadRun(runId).then(() => this.render());
    }, 150);
  }

  private onWs(msg: WsMessage): void {
    switch (msg.type) {
      case "snapshot":
        this.data.runs = msg.runs;
        this.render();
        break;
      case "run_started":
      case "run_finished":
        void this.refreshIndexes().then(() => {
          if (msg.type === "run_finished" && msg.run_id === this.state.selectedRun) {
            this.scheduleRunRefresh();
          }
          this.render();
        });
        break;
      case "event":
        if (this.state.liveFollow && msg.run_id === this.state.selectedRun) {
          this.scheduleRunRefresh();
        }
        break;
      case "eval_progress":
      case "eval_finished":
        if (this.data.progress) {
          this.data.progress = applyEvalMessage(this.data.progress, msg);
          if (this.data.progress.finished) void this.finishEval();
          this.render();
        }
        break;
    }
  }

  private async finishEval(): Promise<void> {
    const progress = this.data.progress;
    if (!progress) return;
    if (progress.error) {
      this.data.notice = `eval failed: ${progress.error}`;
    } else {
      try {
        const state = await this.api.evalRun(progress.evalRunId);
        if (state.status === "done" && state.report) this.data.report = state.report;
      } catch (err) {
        this.data.notice = err instanceof Error ? err.message : String(err);
      }
    }
    this.data.progress = null;
    await this.refreshIndexes();
    this.render();
  }

  private handlers(): Handlers {
    return {
      selectScreen: (screen) => {
        this.state.screen = screen;
        void this.refreshIndexes().then(() => this.render());
      },
      selectRun: (runId) => {
        this.state.selectedRun = runId;
        this.state.collapsed = new Set();
        void this.loadRun(runId).then(() => this.render());
      },
      setMode: (mode) => {
        this.state.viewMode = mode;
        this.render();
      },
      toggleFollow: () => {
        this.state.liveFollow = !this.state.liveFollow;
        this.render();
      },
      toggleSpan: (spanId) => {
        const collapsed = this.state.collapsed;
        if (collapsed.has(spanId)) collapsed.delete(spanId);
        else collapsed.add(spanId);
        this.render();
      },
      openDialog: () => {
        if (!this.data.runDoc) return;
        this.data.dialog = openDialog(this.data.runDoc.run_id, this.data.runDoc.root, this.data.datasets);
        this.render();
      },
      dialog: {
        select: (name) => this.updateDialog((d) => selectDataset(d, name)),
        inputPath: (text) => this.updateDialog((d) => ({ ...d, inputPath: text, submitError: null })),
        outputPath: (text) => this.updateDialog((d) => ({ ...d, outputPath: text, submitError: null })),
        reference: (text) => this.updateDialog((d) => ({ ...d, referenceText: text })),
        note: (text) => this.updateDialog((d) => ({ ...d, note: text })),
        submit: () => void this.submitDialog(),
        cancel: () => {
          this.data.dialog = null;
          this.render();
        },
      },
      openDataset: (name) => {
        void this.api
          .dataset(name)
          .then((doc) => {
            this.data.datasetDoc = doc;
            this.state.selectedDatapoint = null;
          })
          .catch((err: unknown) => {
            this.data.notice = err instanceof Error ? err.message : String(err);
          })
          .then(() => this.render());
      },
      runEval: (name) => {
        void this.api
          .startEval(name)
          .then((evalRunId) => {
            this.data.progress = newProgress(evalRunId);
            this.data.report = null;
          })
          .catch((err: unknown) => {
            this.data.notice = err instanceof Error ? err.message : String(err);
          })
          .then(() => this.render());
      },
      openReport: (stem) => {
        void this.api
          .evalRun(stem)
          .then((state) => {
            if (state.status === "done" && state.report) this.data.report = state.report;
            else this.data.notice = `report ${stem} is still running`;
          })
          .catch((err: unknown) => {
            this.data.notice = err instanceof Error ? err.message : String(err);
          })
          .then(() => this.render());
      },
      openTrace: (traceRef) => {
        this.state.screen = "runs";
        this.state.selectedRun = traceRef;
        this.state.collapsed = new Set();
        void this.loadRun(traceRef).then(() => this.render());
      },
    };
  }

  private updateDialog(fn: (d: DialogState) => DialogState): void {
    if (!this.data.dialog) return;
    this.data.dialog = fn(this.data.dialog);
    this.render();
  }

  private async submitDialog(): Promise<void> {
    const dialog = this.data.dialog;
    if (!dialog || !dialog.selected) return;
    const body = submitBody(dialog);
    if (body === null) return;
    try {
      await this.api.promoteRow(dialog.selected, body);
      this.data.dialog = null;
      this.data.notice = `added a row to ${dialog.selected}`;
      await this.refreshIndexes();
    } catch (err) {
      // e.g. 422 naming the failing path step; keep the dialog open
      dialog.submitError = err instanceof ApiError ? err.message : String(err);
    }
    this.render();
  }
}

export function boot(root: Element): App {
  const app = new App(root);
  void app.start();
  return app;
}
