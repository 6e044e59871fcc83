/**
 * DOM wiring. Everything here is view and controller glue: the server does
 * all analysis, and the render path goes through the pure builders in
 * layout/graph/table/whatif/editor, so the same text and knob state always
 * produces the same markup.
 *
 * Refresh rules: editor input is debounced 300 ms, knob checkboxes fire at
 * once, knob number fields are debounced too. Each endpoint has its own
 * NewestWins queue so a stale response can never overwrite a newer one. A
 * failed analyze keeps the last good graph and table on screen, marks those
 * panes stale, points at the offending line in the gutter and shows the
 * message in the banner.
 */

import { ApiClient, ApiError, NewestWins } from "./api.js";
import type { AnalyzeResponse, EstimateResponse } from "./types.js";
import { graphFromLayers, layout } from "./layout.js";
import { renderSvg } from "./graph.js";
import { buildTable, renderTable, cycleSort, Column, SortSpec } from "./table.js";
import {
  Knobs,
  DEFAULT_KNOBS,
  scenarioPayload,
  cycleBars,
  summaryLine,
  fmtMs,
} from "./whatif.js";
import {
  buildGutter,
  renderGutter,
  markersFromDiagnostics,
  markerFromParseError,
  lineStartOffset,
  Marker,
} from "./editor.js";
import { debounce, escapeHtml } from "./util.js";

const api = new ApiClient("");
const analyzeQueue = new NewestWins();
const estimateQueue = new NewestWins();

let lastAnalysis: AnalyzeResponse | null = null;
let knobs: Knobs = { ...DEFAULT_KNOBS };
let sort: SortSpec | null = null;
const collapsed = new Set<string>();
let selected: string | null = null;

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing #${id}`);
  return node as T;
}

const editor = () => el<HTMLTextAreaElement>("editor-text");
const gutter = () => el<HTMLElement>("editor-gutter");
const banner = () => el<HTMLElement>("banner");

function setBanner(message: string | null, line: number | null = null) {
  const b = banner();
  if (!message) {
    b.classList.add("hidden");
    b.textContent = "";
    delete b.dataset.line;
    return;
  }
  b.classList.remove("hidden");
  b.textContent = line !== null ? `line ${line}: ${message}` : message;
  if (line !== null) b.dataset.line = String(line);
  else delete b.dataset.line;
}

function setStale(paneId: string, stale: boolean) {
  el(paneId).classList.toggle("stale", stale);
}

function updateGutter(markers: Marker[]) {
  gutter().innerHTML = renderGutter(buildGutter(editor().value, markers));
  gutter().scrollTop = editor().scrollTop;
}

function jumpToLine(line: number) {
  const area = editor();
  const start = lineStartOffset(area.value, line);
  area.focus();
  area.setSelectionRange(start, start);
  const approx = (line - 1) / Math.max(1, area.value.split("\n").length);
  area.scrollTop = approx * area.scrollHeight - area.clientHeight / 2;
}

function renderGraphPane(doc: AnalyzeResponse) {
  const host = el("graph-host");
  const note = el("graph-note");
  try {
    const { nodes, edges } = graphFromLayers(doc.layers);
    host.innerHTML = renderSvg(layout(nodes, edges));
    note.classList.add("hidden");
  } catch (err) {
    // table view still carries the numbers when layout cannot place the graph
    host.innerHTML = "";
    note.textContent = `graph layout unavailable: ${String(err)}`;
    note.classList.remove("hidden");
  }
  applySelection();
}

function renderTablePane(doc: AnalyzeResponse) {
  el("table-host").innerHTML = renderTable(buildTable(doc, sort, collapsed));
  applySelection();
}

function applySelection() {
  for (const n of document.querySelectorAll(".node.selected, tr.selected")) {
    n.classList.remove("selected");
  }
  if (!selected) return;
  document
    .querySelector(`.node[data-layer="${cssEscape(selected)}"]`)
    ?.classList.add("selected");
  document
    .querySelector(`tr[data-layer="${cssEscape(selected)}"]`)
    ?.classList.add("selected");
}

function cssEscape(value: string): string {
  return value.replace(/["\\]/g, "\\$&");
}

function selectLayer(name: string, scrollTo: "graph" | "table") {
  selected = name;
  applySelection();
  const target =
    scrollTo === "graph"
      ? document.querySelector(`.node[data-layer="${cssEscape(name)}"]`)
      : document.querySelector(`tr[data-layer="${cssEscape(name)}"]`);
  target?.scrollIntoView({ block: "center", behavior: "smooth" });
}

async function refreshAnalysis() {
  setStale("graph-pane", true);
  setStale("table-pane", true);
  const text = editor().value;
  try {
    const doc = await analyzeQueue.run((signal) => api.analyze(text, signal));
    if (doc === null) return; // superseded by a newer edit
    lastAnalysis = doc;
    renderGraphPane(doc);
    renderTablePane(doc);
    updateGutter(markersFromDiagnostics(doc.diagnostics));
    setBanner(null);
    setStale("graph-pane", false);
    setStale("table-pane", false);
  } catch (err) {
    // last good panes stay up, marked stale
    if (err instanceof ApiError) {
      updateGutter(markerFromParseError(err.message, err.span));
      setBanner(err.message, err.span ? err.span.line : null);
    } else {
      setBanner(String(err));
    }
  }
}

function renderEstimatePane(doc: EstimateResponse) {
  el("whatif-summary").innerHTML =
    `<span class="fps">${doc.fps.toFixed(2)}</span><span class="fps-unit">fps</span>` +
    `<span class="detail">${escapeHtml(summaryLine(doc))}</span>`;
  const rows = cycleBars(doc)
    .map(
      (b) =>
        `<div class="bar-row" title="${escapeHtml(b.name)}: ${b.cycles.toLocaleString("en-US")} cycles">` +
        `<span class="bar-label">${escapeHtml(b.name)}</span>` +
        `<span class="bar-track"><span class="bar-fill" style="width:${(b.fraction * 100).toFixed(1)}%"></span></span>` +
        `</div>`,
    )
    .join("");
  el("whatif-bars").innerHTML = rows;
  el("whatif-foot").textContent =
    `${doc.total_cycles.toLocaleString("en-US")} cycles total, ` +
    `${fmtMs(doc.t_frame_ms)} per frame, slowdown if flushed ${doc.slowdown_factor.toFixed(2)}x`;
}

async function refreshEstimate() {
  setStale("whatif-pane", true);
  const text = editor().value;
  try {
    const doc = await estimateQueue.run((signal) =>
      api.estimate(text, scenarioPayload(knobs), signal),
    );
    if (doc === null) return;
    renderEstimatePane(doc);
    setStale("whatif-pane", false);
  } catch (err) {
    if (err instanceof ApiError) {
      setBanner(err.message, err.span ? err.span.line : null);
    } else {
      setBanner(String(err));
    }
  }
}

function refreshAll() {
  void refreshAnalysis();
  void refreshEstimate();
}

function readKnobs(): Knobs {
  const num = (id: string): number | null => {
    const raw = el<HTMLInputElement>(id).value.trim();
    if (!raw) return null;
    const v = Number(raw);
    return Number.isFinite(v) ? v : null;
  };
  return {
    flushFixed: el<HTMLInputElement>("knob-flush").checked,
    pack1x1: el<HTMLInputElement>("knob-pack").checked,
    fixedPoint: el<HTMLInputElement>("knob-fixed").checked,
    prefetch: num("knob-prefetch"),
    clockMhz: num("knob-clock"),
  };
}

function wireEvents() {
  const debouncedAll = debounce(refreshAll, 300);
  editor().addEventListener("input", () => {
    updateGutter([]);
    debouncedAll();
  });
  editor().addEventListener("scroll", () => {
    gutter().scrollTop = editor().scrollTop;
  });

  banner().addEventListener("click", () => {
    const line = banner().dataset.line;
    if (line) jumpToLine(Number(line));
  });
  gutter().addEventListener("click", (ev) => {
    const line = (ev.target as HTMLElement).dataset.line;
    if (line) jumpToLine(Number(line));
  });

  el("graph-host").addEventListener("click", (ev) => {
    const node = (ev.target as Element).closest(".node[data-layer]");
    if (node) selectLayer(node.getAttribute("data-layer")!, "table");
  });

  el("table-host").addEventListener("click", (ev) => {
    const target = ev.target as Element;
    const th = target.closest("th[data-col]");
    if (th && lastAnalysis) {
      sort = cycleSort(sort, th.getAttribute("data-col") as Column);
      renderTablePane(lastAnalysis);
      return;
    }
    const moduleRow = target.closest("tr.module-row");
    if (moduleRow && lastAnalysis) {
      const name = moduleRow.getAttribute("data-module")!;
      if (collapsed.has(name)) collapsed.delete(name);
      else collapsed.add(name);
      renderTablePane(lastAnalysis);
      return;
    }
    const layerRow = target.closest("tr[data-layer]");
    if (layerRow) selectLayer(layerRow.getAttribute("data-layer")!, "graph");
  });

  const debouncedEstimate = debounce(refreshEstimate, 300);
  for (const id of ["knob-flush", "knob-pack", "knob-fixed"]) {
    el(id).addEventListener("change", () => {
      knobs = readKnobs();
      void refreshEstimate();
    });
  }
  for (const id of ["knob-prefetch", "knob-clock"]) {
    el(id).addEventListener("input", () => {
      knobs = readKnobs();
      debouncedEstimate();
    });
  }

  el<HTMLSelectElement>("preset-select").addEventListener("change", (ev) => {
    const sel = ev.target as HTMLSelectElement;
    const text = presetTexts.get(sel.value);
    if (text !== undefined) {
      editor().value = text;
      updateGutter([]);
      refreshAll();
    }
  });
}

const presetTexts = new Map<string, string>();

async function loadPresets() {
  const select = el<HTMLSelectElement>("preset-select");
  try {
    const doc = await api.presets();
    const names = Object.keys(doc.presets).sort();
    for (const name of names) {
      presetTexts.set(name, doc.presets[name]!);
      const opt = document.createElement("option");
      opt.value = name;
      opt.textContent = name;
      select.appendChild(opt);
    }
    const first = names.includes("zynqnet") ? "zynqnet" : names[0];
    if (first !== undefined) {
      select.value = first;
      editor().value = presetTexts.get(first)!;
    }
  } catch (err) {
    setBanner(`failed to load presets: ${String(err)}`);
  }
}

async function main() {
  wireEvents();
  await loadPresets();
  updateGutter([]);
  refreshAll();
}

void main();
