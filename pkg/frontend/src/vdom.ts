// Minimal virtual nodes. Views are pure functions returning VNode trees;
// only mount() touches the document, so everything else runs under plain
// vitest with no browser.

export type Child = VNode | string;

export interface VNode {
  tag: string;
  attrs: Record<string, string>;
  on: Record<string, (ev: Event) => void>;
  children: Child[];
}

export function h(
  tag: string,
  attrs: Record<string, string> = {},
  children: Child[] = [],
  on: Record<string, (ev: Event) => void> = {},
): VNode {
  return { tag, attrs, on, children };
}

export function textOf(node: Child): string {
  if (typeof node === "string") return node;
  return node.children.map(textOf).join("");
}

/** Depth-first search for elements whose class attribute contains cls. */
export function byClass(node: Child, cls: string): VNode[] {
  if (typeof node === "string") return [];
  const own = (node.attrs.class ?? "").split(/\s+/).includes(cls) ? [node] : [];
  return own.concat(node.children.flatMap((c) => byClass(c, cls)));
}

export function mount(parent: Element, node: Child): Node {
  const dom = toDom(node);
  parent.appendChild(dom);
  return dom;
}

export function replaceChildren(parent: Element, ...nodes: Child[]): void {
  parent.replaceChildren(...nodes.map(toDom));
}

const SVG_NS = "http://www.w3.org/2000/svg";
const SVG_TAGS = new Set(["svg", "g", "rect", "line", "path", "text", "polygon", "defs", "marker"]);

function toDom(node: Child): Node {
  if (typeof node === "string") return document.createTextNode(node);
  const el = SVG_TAGS.has(node.tag)
    ? document.createElementNS(SVG_NS, node.tag)
    : document.createElement(node.tag);
  for (const [key, value] of Object.entries(node.attrs)) el.setAttribute(key, value);
  for (const [event, handler] of Object.entries(node.on)) el.addEventListener(event, handler);
  for (const child of node.children) el.appendChild(toDom(child));
  return el;
}
