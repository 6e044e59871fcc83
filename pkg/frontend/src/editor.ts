/**
 * Editor gutter model: line numbers plus error/warning markers computed
 * from diagnostic source spans. Pure string/model functions; the textarea
 * and its DOM wiring live in app.ts.
 */

import type { Diagnostic, SourceSpan } from "./types.js";
import { escapeHtml as esc } from "./util.js";

export type MarkKind = "error" | "warning";

export interface GutterLine {
  line: number; // 1-based
  mark: MarkKind | null;
  title: string; // hover text, empty when unmarked
}

export interface Marker {
  span: SourceSpan;
  kind: MarkKind;
  message: string;
}

export function markersFromDiagnostics(diags: Diagnostic[]): Marker[] {
  const out: Marker[] = [];
  for (const d of diags) {
    if (!d.span) continue;
    out.push({ span: d.span, kind: d.severity, message: `${d.rule}: ${d.message}` });
  }
  return out;
}

export function markerFromParseError(
  message: string,
  span: SourceSpan | undefined,
): Marker[] {
  if (!span) return [];
  return [{ span, kind: "error", message }];
}

export function countLines(text: string): number {
  let n = 1;
  for (let i = 0; i < text.length; i++) {
    if (text.charCodeAt(i) === 10) n++;
  }
  return n;
}

/** errors shadow warnings when both land on one line */
export function buildGutter(text: string, markers: Marker[]): GutterLine[] {
  const lines = countLines(text);
  const byLine = new Map<number, Marker>();
  for (const m of markers) {
    if (m.span.line < 1 || m.span.line > lines) continue;
    const prev = byLine.get(m.span.line);
    if (!prev || (prev.kind === "warning" && m.kind === "error")) {
      byLine.set(m.span.line, m);
    }
  }
  const out: GutterLine[] = [];
  for (let i = 1; i <= lines; i++) {
    const m = byLine.get(i);
    out.push({ line: i, mark: m ? m.kind : null, title: m ? m.message : "" });
  }
  return out;
}

export function renderGutter(lines: GutterLine[]): string {
  return lines
    .map((l) => {
      const cls = l.mark ? ` class="mark-${l.mark}"` : "";
      const title = l.title ? ` title="${esc(l.title)}"` : "";
      return `<div${cls}${title} data-line="${l.line}">${l.line}</div>`;
    })
    .join("");
}

/** 0-based character offset of the start of a 1-based line, for selection */
export function lineStartOffset(text: string, line: number): number {
  if (line <= 1) return 0;
  let seen = 1;
  for (let i = 0; i < text.length; i++) {
    if (text.charCodeAt(i) === 10) {
      seen++;
      if (seen === line) return i + 1;
    }
  }
  return text.length;
}
