// Eval results rendered like a unit-test report: one row per
// datapoint with a pass/fail verdict, scores, explanation, cost, and
// a link back to the captured trace. Live progress accumulates rows
// from WS messages until the final report replaces them.

import { fmtCompact, fmtMs, fmtScore, fmtTokens } from "./format.js";
import type { ReportDoc, ReportRow, WsMessage } from "./types.js";
import { h, type VNode } from "./vdom.js";

// Mirrors the service's verdict: a row passes when it executed
// cleanly and every score clears the threshold.
export function rowPasses(row: ReportRow, threshold: number): boolean {
  return row.status === "ok" && Object.values(row.scores).every((s) => s.value >= threshold);
}

export function scoreColumns(rows: ReportRow[]): string[] {
  const seen: string[] = [];
  for (const row of rows) {
    for (const name of Object.keys(row.scores)) {
      if (!seen.includes(name)) seen.push(name);
    }
  }
  return seen;
}

function explanationOf(row: ReportRow, columns: string[]): string {
  if (row.status !== "ok") return row.error ?? row.status;
  return columns
    .map((name) => row.scores[name]?.explanation)
    .filter((text): text is string => Boolean(text))
    .join("; ");
}

function resultRow(
  row: ReportRow,
  columns: string[],
  threshold: number,
  onOpenTrace?: (traceRef: string) => void,
): VNode {
  const passed = rowPasses(row, threshold);
  const attrs: Record<string, string> = {
    class: `eval-row ${passed ? "pass" : "fail"}`,
    "data-row": row.id,
  };
  if (row.trace_ref) attrs["data-trace"] = row.trace_ref;
  const cells: VNode[] = [
    h("td", { class: "verdict" }, [passed ? "PASS" : "FAIL"]),
    h("td", { class: "row-id mono" }, [row.id]),
  ];
  for (const name of columns) {
    const score = row.scores[name];
    cells.push(h("td", { class: `score score-${name}` }, [score ? fmtScore(score.value) : ""]));
  }
  cells.push(h("td", { class: "explanation" }, [explanationOf(row, columns)]));
  cells.push(h("td", { class: "generated mono" }, [fmtCompact(row.generated_output)]));
  cells.push(h("td", { class: "usage" }, [fmtTokens(row.usage?.total_tokens)]));
  cells.push(h("td", { class: "wall" }, [fmtMs(row.wall_ms)]));
  const on: Record<string, (ev: Event) => void> = {};
  const traceRef = row.trace_ref;
  if (traceRef) on.click = () => onOpenTrace?.(traceRef);
  return h("tr", attrs, cells, on);
}

export function resultsTable(report: ReportDoc, onOpenTrace?: (traceRef: string) => void): VNode {
  const columns = scoreColumns(report.rows);
  const head = h("tr", {}, [
    h("th", {}, ["verdict"]),
    h("th", {}, ["row"]),
    ...columns.map((name) => h("th", {}, [name])),
    h("th", {}, ["explanation"]),
    h("th", {}, ["output"]),
    h("th", {}, ["tokens"]),
    h("th", {}, ["wall"]),
  ]);
  const body = report.rows.map((row) =>
    resultRow(row, columns, report.pass_threshold, onOpenTrace),
  );
  return h("table", { class: "results-table" }, [
    h("thead", {}, [head]),
    h("tbody", {}, body),
    h("tfoot", {}, [h("tr", {}, [h("td", { colspan: String(6 + columns.length) }, [aggregatesFooter(report)])])]),
  ]);
}

export function aggregatesFooter(report: ReportDoc): VNode {
  const threshold = report.pass_threshold;
  const passed = report.rows.filter((row) => rowPasses(row, threshold)).length;
  const failed = report.rows.length - passed;
  const cells: VNode[] = [
    h("span", { class: "agg-passed" }, [`${passed} passed`]),
    h("span", { class: "agg-failed" }, [`${failed} failed`]),
  ];
  for (const [name, mean] of Object.entries(report.aggregates.means)) {
    cells.push(h("span", { class: "agg-mean", "data-evaluator": name }, [`${name} mean ${fmtScore(mean)}`]));
  }
  cells.push(h("span", { class: "agg-tokens" }, [fmtTokens(report.aggregates.total_usage.total_tokens)]));
  cells.push(h("span", { class: "agg-wall" }, [fmtMs(report.aggregates.total_wall_ms)]));
  if (report.warnings.length > 0) {
    cells.push(h("span", { class: "agg-warnings" }, [report.warnings.join("; ")]));
  }
  return h("div", { class: "aggregates" }, cells);
}

// Live progress for one launched eval run, fed purely by WS messages.

export interface EvalProgress {
  evalRunId: string;
  rows: ReportRow[];
  finished: boolean;
  reportStem?: string;
  error?: string;
}

export function newProgress(evalRunId: string): EvalProgress {
  return { evalRunId, rows: [], finished: false };
}

export function applyEvalMessage(progress: EvalProgress, msg: WsMessage): EvalProgress {
  if (msg.type === "eval_progress" && msg.eval_run_id === progress.evalRunId) {
    return { ...progress, rows: [...progress.rows, msg.row] };
  }
  if (msg.type === "eval_finished" && msg.eval_run_id === progress.evalRunId) {
    return { ...progress, finished: true, reportStem: msg.report, error: msg.error };
  }
  return progress;
}

export function progressView(progress: EvalProgress, total: number | null): VNode {
  const done = progress.rows.length;
  const label = total === null ? `${done} rows done` : `${done} / ${total} rows done`;
  return h("div", { class: "eval-progress" }, [
    h("span", { class: "progress-count" }, [label]),
    progress.error ? h("span", { class: "progress-error" }, [progress.error]) : "",
  ]);
}
