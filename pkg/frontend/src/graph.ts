// Layered layout for the announced agent graph. Kahn-style peeling
// assigns each node to a layer; a cycle (agent loops are common) is
// broken by promoting the first remaining node in declaration order,
// which keeps the layout deterministic for a given document.

import type { GraphDoc, GraphEdge } from "./types.js";
import { h, type VNode } from "./vdom.js";

export interface PlacedNode {
  id: string;
  label: string;
  layer: number;
  row: number;
  x: number;
  y: number;
}

export interface PlacedEdge extends GraphEdge {
  back: boolean;
}

export interface GraphLayout {
  nodes: PlacedNode[];
  edges: PlacedEdge[];
  width: number;
  height: number;
}

const X_GAP = 160;
const Y_GAP = 72;
const NODE_W = 120;
const NODE_H = 36;
const MARGIN = 24;

export function layoutGraph(doc: GraphDoc): GraphLayout {
  const ids = doc.nodes.map((n) => n.id);
  const indegree = new Map<string, number>(ids.map((id) => [id, 0]));
  for (const edge of doc.edges) {
    if (indegree.has(edge.to)) indegree.set(edge.to, (indegree.get(edge.to) ?? 0) + 1);
  }

  const layerOf = new Map<string, number>();
  const remaining = new Set(ids);
  let layer = 0;
  while (remaining.size > 0) {
    let ready = [...remaining].filter((id) => (indegree.get(id) ?? 0) === 0);
    if (ready.length === 0) ready = [[...remaining][0]];
    for (const id of ready) {
      layerOf.set(id, layer);
      remaining.delete(id);
    }
    for (const edge of doc.edges) {
      if (ready.includes(edge.from) && remaining.has(edge.to)) {
        indegree.set(edge.to, (indegree.get(edge.to) ?? 1) - 1);
      }
    }
    layer += 1;
  }

  const rows = new Map<number, number>();
  const nodes: PlacedNode[] = doc.nodes.map((n) => {
    const l = layerOf.get(n.id) ?? 0;
    const row = rows.get(l) ?? 0;
    rows.set(l, row + 1);
    return { id: n.id, label: n.label, layer: l, row, x: MARGIN + l * X_GAP, y: MARGIN + row * Y_GAP };
  });
  const edges: PlacedEdge[] = doc.edges.map((e) => ({
    ...e,
    back: (layerOf.get(e.to) ?? 0) <= (layerOf.get(e.from) ?? 0),
  }));
  const width = MARGIN * 2 + NODE_W + Math.max(0, ...nodes.map((n) => n.x));
  const height = MARGIN * 2 + NODE_H + Math.max(0, ...nodes.map((n) => n.y));
  return { nodes, edges, width, height };
}

function edgeLine(edge: PlacedEdge, byId: Map<string, PlacedNode>): VNode[] {
  const from = byId.get(edge.from);
  const to = byId.get(edge.to);
  if (!from || !to) return [];
  const x1 = from.x + NODE_W;
  const y1 = from.y + NODE_H / 2;
  const x2 = to.x;
  const y2 = to.y + NODE_H / 2;
  const cls = edge.back ? "edge edge-back" : "edge";
  const parts: VNode[] = [
    h("line", { class: cls, x1: String(x1), y1: String(y1), x2: String(x2), y2: String(y2) }),
  ];
  if (edge.label) {
    parts.push(
      h(
        "text",
        { class: "edge-label", x: String((x1 + x2) / 2), y: String((y1 + y2) / 2 - 4) },
        [edge.label],
      ),
    );
  }
  return parts;
}

/** SVG scene for the graph tab; positions come from layoutGraph. */
export function graphView(doc: GraphDoc): VNode {
  const layout = layoutGraph(doc);
  const byId = new Map(layout.nodes.map((n) => [n.id, n]));
  const edgeNodes = layout.edges.flatMap((e) => edgeLine(e, byId));
  const nodeNodes = layout.nodes.map((n) =>
    h("g", { class: "graph-node", "data-node": n.id, transform: `translate(${n.x},${n.y})` }, [
      h("rect", { width: String(NODE_W), height: String(NODE_H), rx: "6" }),
      h("text", { x: String(NODE_W / 2), y: String(NODE_H / 2 + 4), "text-anchor": "middle" }, [n.label]),
    ]),
  );
  return h(
    "svg",
    {
      class: "graph-view",
      viewBox: `0 0 ${layout.width} ${layout.height}`,
      width: String(layout.width),
      height: String(layout.height),
    },
    [...edgeNodes, ...nodeNodes],
  );
}
