/**
 * Analysis table model and HTML rendering.
 *
 * Unsorted, the table groups layers under collapsible module subtotal rows
 * (name prefix before "/"). Picking a sort column flattens it to plain layer
 * rows ordered by that column. A totals row sits at the bottom either way.
 *
 * Model building and HTML are split so tests can assert on row structure
 * without parsing markup.
 */

import type { AnalyzeResponse, GroupRow, LayerRow } from "./types.js";
import { modulePrefix } from "./graph.js";
import { escapeHtml as esc } from "./util.js";

export const COLUMNS = [
  "name",
  "kind",
  "ch_out",
  "h_out",
  "w_out",
  "macc",
  "comp",
  "add",
  "div",
  "exp",
  "params",
  "activations",
] as const;

export type Column = (typeof COLUMNS)[number];
const NUMERIC: ReadonlySet<string> = new Set(
  COLUMNS.filter((c) => c !== "name" && c !== "kind"),
);

export interface SortSpec {
  column: Column;
  descending: boolean;
}

export type Row =
  | { type: "module"; module: string; cells: (string | number)[]; collapsed: boolean }
  | { type: "layer"; name: string; module: string | null; cells: (string | number)[] }
  | { type: "totals"; cells: (string | number)[] };

export interface TableModel {
  columns: readonly string[];
  rows: Row[];
  sort: SortSpec | null;
}

function layerCells(l: LayerRow): (string | number)[] {
  return COLUMNS.map((c) => l[c]);
}

function groupCells(g: GroupRow, label: string): (string | number)[] {
  return COLUMNS.map((c) => {
    if (c === "name") return label;
    if (c === "kind" || c === "ch_out" || c === "h_out" || c === "w_out") return "";
    return g[c];
  });
}

export function buildTable(
  doc: AnalyzeResponse,
  sort: SortSpec | null = null,
  collapsed: ReadonlySet<string> = new Set(),
): TableModel {
  const rows: Row[] = [];

  if (sort) {
    const ordered = [...doc.layers].sort((a, b) => {
      const av = a[sort.column];
      const bv = b[sort.column];
      const cmp =
        typeof av === "number" && typeof bv === "number"
          ? av - bv
          : String(av).localeCompare(String(bv));
      return sort.descending ? -cmp : cmp;
    });
    for (const l of ordered) {
      rows.push({
        type: "layer",
        name: l.name,
        module: modulePrefix(l.name),
        cells: layerCells(l),
      });
    }
  } else {
    const groups = new Map(doc.modules.map((m) => [m.name, m]));
    let openModule: string | null = null;
    for (const l of doc.layers) {
      const mod = modulePrefix(l.name);
      if (mod && mod !== openModule && groups.has(mod)) {
        rows.push({
          type: "module",
          module: mod,
          cells: groupCells(groups.get(mod)!, mod),
          collapsed: collapsed.has(mod),
        });
        openModule = mod;
      } else if (!mod) {
        openModule = null;
      }
      if (!mod || !collapsed.has(mod)) {
        rows.push({ type: "layer", name: l.name, module: mod, cells: layerCells(l) });
      }
    }
  }

  rows.push({ type: "totals", cells: groupCells(doc.totals, "TOTAL") });
  return { columns: COLUMNS, rows, sort };
}

function fmt(value: string | number): string {
  if (typeof value !== "number") return value;
  return value.toLocaleString("en-US");
}

export function renderTable(model: TableModel): string {
  const parts: string[] = [];
  parts.push('<table class="analysis">');
  parts.push("<thead><tr>");
  for (const col of model.columns) {
    const cls = NUMERIC.has(col) ? ' class="num"' : "";
    let mark = "";
    if (model.sort && model.sort.column === col) {
      mark = model.sort.descending ? " ▼" : " ▲";
    }
    parts.push(`<th data-col="${col}"${cls}>${esc(col)}${mark}</th>`);
  }
  parts.push("</tr></thead>");
  parts.push("<tbody>");
  for (const row of model.rows) {
    let attrs: string;
    if (row.type === "module") {
      const state = row.collapsed ? " collapsed" : "";
      attrs = ` class="module-row${state}" data-module="${esc(row.module)}"`;
    } else if (row.type === "layer") {
      const mod = row.module ? ` data-module="${esc(row.module)}"` : "";
      attrs = ` class="layer-row" data-layer="${esc(row.name)}"${mod}`;
    } else {
      attrs = ' class="totals-row"';
    }
    parts.push(`<tr${attrs}>`);
    row.cells.forEach((cell, i) => {
      const cls = NUMERIC.has(model.columns[i]!) ? ' class="num"' : "";
      parts.push(`<td${cls}>${esc(fmt(cell))}</td>`);
    });
    parts.push("</tr>");
  }
  parts.push("</tbody></table>");
  return parts.join("");
}

/** next sort state after clicking a header: asc, desc, then back to grouped */
export function cycleSort(current: SortSpec | null, column: Column): SortSpec | null {
  if (!current || current.column !== column) {
    return { column, descending: NUMERIC.has(column) };
  }
  if (NUMERIC.has(column)) {
    return current.descending ? { column, descending: false } : null;
  }
  return current.descending ? null : { column, descending: true };
}
