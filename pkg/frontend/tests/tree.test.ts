import { describe, expect, test } from "vitest";

import { fmtJson } from "../src/format.js";
import { spanCount, traceTree } from "../src/tree.js";
import type { RunDoc, SpanDoc } from "../src/types.js";
import { byClass, textOf, type VNode } from "../src/vdom.js";
import { runFixture } from "./helpers.js";

function nodeFor(tree: VNode, spanId: string): VNode {
  const hit = byClass(tree, "span-node").find((n) => n.attrs["data-span"] === spanId);
  expect(hit, spanId).toBeDefined();
  return hit!;
}

function expand(doc: RunDoc): SpanDoc[] {
  const out: SpanDoc[] = [];
  const walk = (s: SpanDoc): void => {
    out.push(s);
    s.children.forEach(walk);
  };
  doc.root.children.forEach(walk);
  return out;
}

describe("pretty mode", () => {
  test("headlines are the API's pretty lines, span by span", () => {
    const doc = runFixture();
    const byId = new Map(doc.pretty.map((line) => [line.span_id, line]));
    const tree = traceTree(doc, { mode: "pretty", collapsed: new Set() });
    for (const span of expand(doc)) {
      const line = byId.get(span.span_id)!;
      const node = nodeFor(tree, span.span_id);
      expect(textOf(byClass(node, "headline")[0])).toBe(line.headline);
      expect(textOf(byClass(node, "duration")[0])).toBe(`${line.duration_ms} ms`);
    }
  });

  test("collapsing a span hides exactly its subtree", () => {
    const doc = runFixture();
    const firstAgent = doc.root.children[0];
    const hidden = spanCount(firstAgent);
    const open = byClass(traceTree(doc, { mode: "pretty", collapsed: new Set() }), "span-node").length;
    const closed = byClass(
      traceTree(doc, { mode: "pretty", collapsed: new Set([firstAgent.span_id]) }),
      "span-node",
    ).length;
    expect(open - closed).toBe(hidden);
    // the collapsed span itself stays visible
    const tree = traceTree(doc, { mode: "pretty", collapsed: new Set([firstAgent.span_id]) });
    expect(byClass(tree, "span-node").some((n) => n.attrs["data-span"] === firstAgent.span_id)).toBe(true);
  });

  test("a running span gets the live indicator", () => {
    const doc = runFixture();
    // derive a mid-flight variant of the recorded doc
    doc.state = "receiving";
    doc.root.children[1].status = "running";
    const tree = traceTree(doc, { mode: "pretty", collapsed: new Set() });
    expect(byClass(tree, "running-dot").length).toBe(1);
    expect(textOf(byClass(tree, "chip")[0])).toBe("running");
  });

  test("an errored span shows its message", () => {
    const doc = runFixture();
    const tool = doc.root.children[0].children[1];
    tool.status = "error";
    tool.error_message = "boom";
    const tree = traceTree(doc, { mode: "pretty", collapsed: new Set() });
    const node = nodeFor(tree, tool.span_id);
    expect(textOf(byClass(node, "error-message")[0])).toBe("boom");
  });
});

describe("raw mode", () => {
  test("shows each span's input and output JSON verbatim", () => {
    const doc = runFixture();
    const tree = traceTree(doc, { mode: "raw", collapsed: new Set() });
    for (const span of expand(doc)) {
      const node = nodeFor(tree, span.span_id);
      expect(textOf(byClass(node, "io-input")[0])).toBe(fmtJson(span.input));
      expect(textOf(byClass(node, "io-output")[0])).toBe(fmtJson(span.output));
    }
  });

  test("labels spans by kind and name", () => {
    const doc = runFixture();
    const tree = traceTree(doc, { mode: "raw", collapsed: new Set() });
    const tool = doc.root.children[0].children[1];
    expect(textOf(byClass(nodeFor(tree, tool.span_id), "headline")[0])).toBe("tool read_schedule");
  });
});
