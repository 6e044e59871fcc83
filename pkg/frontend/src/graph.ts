/**
 * SVG string rendering of a placed layout.
 *
 * One rect+label per layer, fill keyed by layer kind; edges as lines with an
 * arrowhead marker; layers sharing a name prefix before the first "/" get a
 * translucent group rect behind them so modules read as units.
 *
 * String building only. The caller owns insertion into the document and
 * event wiring (nodes carry data-layer attributes for that).
 */

import { Layout, PlacedNode, NODE_W, NODE_H } from "./layout.js";
import { escapeHtml as esc } from "./util.js";

const KIND_FILL: Record<string, string> = {
  Data: "#8a8a8a",
  Convolution: "#4878a8",
  ReLU: "#58a868",
  Pooling: "#a85448",
  Concat: "#a87848",
  Dropout: "#7a7a58",
  Softmax: "#7858a8",
};
const DEFAULT_FILL = "#607080";

export function kindFill(kind: string): string {
  return KIND_FILL[kind] ?? DEFAULT_FILL;
}

/** prefix before the first "/", or null for ungrouped names */
export function modulePrefix(name: string): string | null {
  const i = name.indexOf("/");
  return i > 0 ? name.slice(0, i) : null;
}

interface GroupBox {
  prefix: string;
  x: number;
  y: number;
  w: number;
  h: number;
}

export function groupBoxes(nodes: PlacedNode[]): GroupBox[] {
  const byPrefix = new Map<string, PlacedNode[]>();
  for (const n of nodes) {
    const p = modulePrefix(n.name);
    if (!p) continue;
    if (!byPrefix.has(p)) byPrefix.set(p, []);
    byPrefix.get(p)!.push(n);
  }
  const boxes: GroupBox[] = [];
  const pad = 8;
  for (const [prefix, members] of byPrefix) {
    if (members.length < 2) continue;
    const xs = members.map((m) => m.x);
    const ys = members.map((m) => m.y);
    boxes.push({
      prefix,
      x: Math.min(...xs) - NODE_W / 2 - pad,
      y: Math.min(...ys) - NODE_H / 2 - pad,
      w: Math.max(...xs) - Math.min(...xs) + NODE_W + 2 * pad,
      h: Math.max(...ys) - Math.min(...ys) + NODE_H + 2 * pad,
    });
  }
  boxes.sort((a, b) => a.y - b.y || a.x - b.x);
  return boxes;
}

export function renderSvg(lay: Layout): string {
  const parts: string[] = [];
  parts.push(
    `<svg xmlns="http://www.w3.org/2000/svg" class="net-graph" ` +
      `viewBox="0 0 ${lay.width} ${lay.height}" ` +
      `width="${lay.width}" height="${lay.height}">`,
  );
  parts.push(
    `<defs><marker id="arrow" viewBox="0 0 8 8" refX="7" refY="4" ` +
      `markerWidth="6" markerHeight="6" orient="auto-start-reverse">` +
      `<path d="M 0 0 L 8 4 L 0 8 z" fill="var(--edge, #999)"/></marker></defs>`,
  );

  for (const g of groupBoxes(lay.nodes)) {
    parts.push(
      `<g class="module-group" data-module="${esc(g.prefix)}">` +
        `<rect x="${g.x}" y="${g.y}" width="${g.w}" height="${g.h}" rx="6"/>` +
        `<text x="${g.x + 6}" y="${g.y + 12}">${esc(g.prefix)}</text></g>`,
    );
  }

  for (const e of lay.edges) {
    parts.push(
      `<line class="edge" x1="${e.x1}" y1="${e.y1}" x2="${e.x2}" y2="${e.y2}" ` +
        `marker-end="url(#arrow)" data-from="${esc(e.from)}" data-to="${esc(e.to)}"/>`,
    );
  }

  for (const n of lay.nodes) {
    const x = n.x - NODE_W / 2;
    const y = n.y - NODE_H / 2;
    parts.push(
      `<g class="node" data-layer="${esc(n.name)}" data-kind="${esc(n.kind)}">` +
        `<rect x="${x}" y="${y}" width="${NODE_W}" height="${NODE_H}" rx="4" ` +
        `fill="${kindFill(n.kind)}"/>` +
        `<text x="${n.x}" y="${n.y + 4}" text-anchor="middle">${esc(n.name)}</text>` +
        `</g>`,
    );
  }

  parts.push("</svg>");
  return parts.join("\n");
}
