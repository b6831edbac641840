// Trace tree view: the run header plus one collapsible node per span.
// Pretty mode shows the service's condensed headlines; raw mode shows
// each span's input/output JSON verbatim.

import { fmtJson, fmtMs, fmtTokens } from "./format.js";
import type { PrettyLine, RunDoc, SpanDoc } from "./types.js";
import { h, type VNode } from "./vdom.js";

export interface TreeOptions {
  mode: "pretty" | "raw";
  collapsed: Set<string>;
  onToggle?: (spanId: string) => void;
  onAddToDataset?: () => void;
}

export function spanCount(span: SpanDoc): number {
  return span.children.reduce((n, child) => n + 1 + spanCount(child), 0);
}

function prettyIndex(run: RunDoc): Map<string, PrettyLine> {
  const index = new Map<string, PrettyLine>();
  for (const line of run.pretty ?? []) index.set(line.span_id, line);
  return index;
}

function stateChip(state: RunDoc["state"]): VNode {
  const label = state === "receiving" ? "running" : state;
  return h("span", { class: `chip state-${state}` }, [label]);
}

export function runHeader(run: RunDoc, opts: TreeOptions): VNode {
  const rootLine = prettyIndex(run).get(run.root.span_id);
  const headline = rootLine?.headline ?? run.run_id;
  const cells: VNode[] = [
    h("span", { class: "run-id mono" }, [run.run_id]),
    stateChip(run.state),
    h("span", { class: "muted" }, [run.framework]),
    h("span", { class: "badge duration" }, [fmtMs(run.duration_ms)]),
    h("span", { class: "badge tokens" }, [fmtTokens(run.total_usage?.total_tokens)]),
    h("span", { class: "muted" }, [`${run.event_count} events`]),
  ];
  if (opts.onAddToDataset) {
    cells.push(
      h("button", { class: "add-to-dataset" }, ["Add to dataset…"], {
        click: () => opts.onAddToDataset?.(),
      }),
    );
  }
  const rows: VNode[] = [h("div", { class: "run-header-row" }, cells)];
  rows.push(h("div", { class: "run-headline" }, [headline]));
  if (run.anomalies.length > 0) {
    rows.push(h("div", { class: "anomalies" }, [`anomalies: ${run.anomalies.join("; ")}`]));
  }
  return h("header", { class: "run-header" }, rows);
}

function spanNode(span: SpanDoc, pretty: Map<string, PrettyLine>, opts: TreeOptions): VNode {
  const line = pretty.get(span.span_id);
  const collapsed = opts.collapsed.has(span.span_id);
  const classes = `span-node kind-${span.kind} status-${span.status}`;

  const headCells: (VNode | string)[] = [];
  if (span.children.length > 0) {
    headCells.push(
      h("button", { class: "toggle", "aria-expanded": String(!collapsed) }, [collapsed ? "▸" : "▾"], {
        click: () => opts.onToggle?.(span.span_id),
      }),
    );
  }
  if (span.status === "running") headCells.push(h("span", { class: "running-dot" }, ["●"]));

  if (opts.mode === "pretty") {
    headCells.push(h("span", { class: "headline" }, [line?.headline ?? `${span.kind} ${span.name}`]));
    if (line?.detail) headCells.push(h("span", { class: "detail muted" }, [line.detail]));
    headCells.push(h("span", { class: "badge duration" }, [fmtMs(line?.duration_ms)]));
    headCells.push(h("span", { class: "badge tokens" }, [fmtTokens(line?.usage?.total_tokens)]));
  } else {
    headCells.push(h("span", { class: "headline mono" }, [`${span.kind} ${span.name}`.trim()]));
    headCells.push(h("span", { class: "badge duration" }, [fmtMs(span.duration_ms)]));
    headCells.push(h("span", { class: "badge tokens" }, [fmtTokens(span.usage?.total_tokens)]));
  }

  const body: VNode[] = [h("div", { class: "span-head" }, headCells)];
  if (opts.mode === "raw") {
    body.push(h("pre", { class: "io io-input" }, [fmtJson(span.input)]));
    body.push(h("pre", { class: "io io-output" }, [fmtJson(span.output)]));
    if (span.error_message) body.push(h("div", { class: "error-message" }, [span.error_message]));
  } else if (span.status === "error" && span.error_message) {
    body.push(h("div", { class: "error-message" }, [span.error_message]));
  }
  if (!collapsed && span.children.length > 0) {
    body.push(h("ul", { class: "children" }, span.children.map((c) => spanNode(c, pretty, opts))));
  }
  return h("li", { class: classes, "data-span": span.span_id }, body);
}

/** The whole trace screen body for one run; a pure function of the doc. */
export function traceTree(run: RunDoc, opts: TreeOptions): VNode {
  const pretty = prettyIndex(run);
  return h("section", { class: "trace-view" }, [
    runHeader(run, opts),
    h("ul", { class: "trace-tree" }, run.root.children.map((c) => spanNode(c, pretty, opts))),
  ]);
}
