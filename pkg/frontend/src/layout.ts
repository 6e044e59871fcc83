/**
 * Layered top-to-bottom DAG layout.
 *
 * Longest-path layering, then a few barycenter ordering sweeps to cut
 * crossings, then per-layer slot placement centered on the widest layer.
 * Pure and deterministic: same graph in, same coordinates out.
 */

export interface GraphNode {
  name: string;
  kind: string;
}

export interface GraphEdge {
  from: string;
  to: string;
}

export interface PlacedNode extends GraphNode {
  x: number; // center
  y: number; // center
  layer: number;
}

export interface PlacedEdge extends GraphEdge {
  x1: number;
  y1: number;
  x2: number;
  y2: number;
}

export interface Layout {
  nodes: PlacedNode[];
  edges: PlacedEdge[];
  width: number;
  height: number;
}

export const NODE_W = 130;
export const NODE_H = 30;
const H_GAP = 26;
const V_GAP = 34;
const MARGIN = 24;

export function layout(nodes: GraphNode[], edges: GraphEdge[]): Layout {
  const byName = new Map<string, GraphNode>();
  for (const n of nodes) byName.set(n.name, n);
  const parents = new Map<string, string[]>();
  const children = new Map<string, string[]>();
  for (const n of nodes) {
    parents.set(n.name, []);
    children.set(n.name, []);
  }
  for (const e of edges) {
    if (!byName.has(e.from) || !byName.has(e.to)) continue;
    parents.get(e.to)!.push(e.from);
    children.get(e.from)!.push(e.to);
  }

  // longest-path layering via one pass over a topological order
  const layerOf = new Map<string, number>();
  const indeg = new Map<string, number>();
  for (const n of nodes) indeg.set(n.name, parents.get(n.name)!.length);
  const queue = nodes.filter((n) => indeg.get(n.name) === 0).map((n) => n.name);
  const topo: string[] = [];
  while (queue.length) {
    const name = queue.shift()!;
    topo.push(name);
    const ps = parents.get(name)!;
    layerOf.set(name, ps.length ? Math.max(...ps.map((p) => layerOf.get(p)!)) + 1 : 0);
    for (const c of children.get(name)!) {
      indeg.set(c, indeg.get(c)! - 1);
      if (indeg.get(c) === 0) queue.push(c);
    }
  }
  // a cyclic remainder (should not happen for IR graphs) lands on layer 0
  for (const n of nodes) if (!layerOf.has(n.name)) layerOf.set(n.name, 0);

  const depth = Math.max(0, ...[...layerOf.values()]) + 1;
  const rows: string[][] = Array.from({ length: depth }, () => []);
  for (const name of topo) rows[layerOf.get(name)!]!.push(name);
  for (const n of nodes) {
    if (!topo.includes(n.name)) rows[0]!.push(n.name);
  }

  // barycenter sweeps: order each row by the mean slot of its neighbors
  const slot = new Map<string, number>();
  const reindex = () => {
    for (const row of rows) row.forEach((name, i) => slot.set(name, i));
  };
  reindex();
  const meanSlot = (names: string[], fallback: number) =>
    names.length
      ? names.reduce((acc, nm) => acc + slot.get(nm)!, 0) / names.length
      : fallback;
  for (let pass = 0; pass < 4; pass++) {
    const down = pass % 2 === 0;
    const order = down ? rows : [...rows].reverse();
    for (const row of order) {
      const keyed = row.map((name, i) => ({
        name,
        key: meanSlot(down ? parents.get(name)! : children.get(name)!, i),
        tie: i,
      }));
      keyed.sort((a, b) => a.key - b.key || a.tie - b.tie);
      row.splice(0, row.length, ...keyed.map((k) => k.name));
    }
    reindex();
  }

  const widest = Math.max(1, ...rows.map((r) => r.length));
  const width = widest * NODE_W + (widest - 1) * H_GAP + 2 * MARGIN;
  const height = depth * NODE_H + (depth - 1) * V_GAP + 2 * MARGIN;

  const placed = new Map<string, PlacedNode>();
  rows.forEach((row, li) => {
    const rowWidth = row.length * NODE_W + (row.length - 1) * H_GAP;
    const x0 = (width - rowWidth) / 2 + NODE_W / 2;
    row.forEach((name, i) => {
      placed.set(name, {
        ...byName.get(name)!,
        x: x0 + i * (NODE_W + H_GAP),
        y: MARGIN + NODE_H / 2 + li * (NODE_H + V_GAP),
        layer: li,
      });
    });
  });

  const placedEdges: PlacedEdge[] = [];
  for (const e of edges) {
    const a = placed.get(e.from);
    const b = placed.get(e.to);
    if (!a || !b) continue;
    placedEdges.push({
      ...e,
      x1: a.x,
      y1: a.y + NODE_H / 2,
      x2: b.x,
      y2: b.y - NODE_H / 2,
    });
  }

  return {
    nodes: nodes.map((n) => placed.get(n.name)!),
    edges: placedEdges,
    width,
    height,
  };
}

/** bottom/top wiring of an analyze response as layout input */
export function graphFromLayers(
  layers: { name: string; kind: string; bottoms: string[] }[],
): { nodes: GraphNode[]; edges: GraphEdge[] } {
  const nodes = layers.map((l) => ({ name: l.name, kind: l.kind }));
  const edges: GraphEdge[] = [];
  for (const l of layers) {
    for (const b of l.bottoms) {
      edges.push({ from: b, to: l.name });
    }
  }
  return { nodes, edges };
}
