// The two headline contracts, asserted against recorded fixtures:
// the trace tree renders exactly span_count nodes, and the results
// screen shows 4 pass / 1 fail with a displayed mean of 0.80.

import { describe, expect, test } from "vitest";

import { runsTable } from "../src/app.js";
import { fmtScore, fmtTokens } from "../src/format.js";
import { aggregatesFooter, resultsTable } from "../src/results.js";
import { spanCount, traceTree } from "../src/tree.js";
import { byClass, textOf } from "../src/vdom.js";
import { reportFixture, runFixture, runsFixture } from "./helpers.js";

describe("trace tree against the recorded run", () => {
  test("node count equals the span count reported by the run index", () => {
    const doc = runFixture();
    const summary = runsFixture().find((r) => r.run_id === "schedule-demo");
    expect(summary).toBeDefined();
    const tree = traceTree(doc, { mode: "pretty", collapsed: new Set() });
    const nodes = byClass(tree, "span-node");
    expect(nodes.length).toBe(summary!.span_count);
    expect(spanCount(doc.root)).toBe(summary!.span_count);
  });

  test("every span the API returned is on screen exactly once", () => {
    const doc = runFixture();
    const ids: string[] = [];
    const walk = (span: typeof doc.root): void => {
      ids.push(span.span_id);
      span.children.forEach(walk);
    };
    doc.root.children.forEach(walk);
    const tree = traceTree(doc, { mode: "pretty", collapsed: new Set() });
    const rendered = byClass(tree, "span-node").map((n) => n.attrs["data-span"]);
    expect(rendered.sort()).toEqual(ids.sort());
  });

  test("header numbers come from API fields", () => {
    const doc = runFixture();
    const tree = traceTree(doc, { mode: "pretty", collapsed: new Set() });
    const header = byClass(tree, "run-header")[0];
    expect(textOf(byClass(header, "tokens")[0])).toBe(fmtTokens(doc.total_usage.total_tokens));
    expect(textOf(header)).toContain(`${doc.event_count} events`);
  });
});

describe("eval results against the recorded report", () => {
  test("shows 4 pass / 1 fail", () => {
    const report = reportFixture();
    const table = resultsTable(report);
    expect(byClass(table, "pass").length).toBe(4);
    expect(byClass(table, "fail").length).toBe(1);
    const failed = byClass(table, "fail")[0];
    expect(textOf(byClass(failed, "row-id")[0])).toBe("dp-5");
  });

  test("shows mean 0.80", () => {
    const report = reportFixture();
    const footer = aggregatesFooter(report);
    expect(textOf(byClass(footer, "agg-passed")[0])).toBe("4 passed");
    expect(textOf(byClass(footer, "agg-failed")[0])).toBe("1 failed");
    expect(textOf(byClass(footer, "agg-mean")[0])).toBe("exact_match mean 0.80");
    // the displayed figure is the server's aggregate, only formatted
    expect(fmtScore(report.aggregates.means["exact_match"])).toBe("0.80");
  });

  test("every row's cells restate report fields", () => {
    const report = reportFixture();
    const table = resultsTable(report);
    for (const row of report.rows) {
      const tr = byClass(table, "eval-row").find((n) => n.attrs["data-row"] === row.id);
      expect(tr, row.id).toBeDefined();
      expect(textOf(byClass(tr!, "score-exact_match")[0])).toBe(
        fmtScore(row.scores["exact_match"].value),
      );
      expect(textOf(byClass(tr!, "generated")[0])).toBe(String(row.generated_output));
      expect(textOf(byClass(tr!, "usage")[0])).toBe(fmtTokens(row.usage!.total_tokens));
      expect(textOf(byClass(tr!, "wall")[0])).toBe(`${row.wall_ms} ms`);
      expect(tr!.attrs["data-trace"]).toBe(row.trace_ref);
    }
  });
});

describe("run index against the recorded list", () => {
  test("every displayed number is an API field", () => {
    const runs = runsFixture();
    const table = runsTable(runs, null);
    const rows = byClass(table, "run-row");
    expect(rows.length).toBe(runs.length);
    for (const run of runs) {
      const tr = rows.find((n) => n.attrs["data-run"] === run.run_id);
      expect(tr, run.run_id).toBeDefined();
      expect(textOf(byClass(tr!, "span-count")[0])).toBe(String(run.span_count));
      expect(textOf(byClass(tr!, "event-count")[0])).toBe(String(run.event_count));
      expect(textOf(byClass(tr!, "tokens")[0])).toBe(fmtTokens(run.total_tokens));
      expect(textOf(byClass(tr!, "state")[0])).toBe(run.state);
    }
  });
});
