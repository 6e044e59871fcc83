/**
 * What-if panel model: knob state, its request payload, and the per-layer
 * cycle bar geometry derived from an estimate response.
 */

import type { EstimateResponse, Scenario } from "./types.js";

export interface Knobs {
  flushFixed: boolean;
  prefetch: number | null; // null: keep the architecture default
  pack1x1: boolean;
  fixedPoint: boolean;
  clockMhz: number | null;
}

export const DEFAULT_KNOBS: Knobs = {
  flushFixed: false,
  prefetch: null,
  pack1x1: false,
  fixedPoint: false,
  clockMhz: null,
};

/** Only knobs that deviate from the defaults go on the wire. */
export function scenarioPayload(k: Knobs): Scenario {
  const s: Scenario = {};
  if (k.flushFixed) s.flush_fixed = true;
  if (k.prefetch !== null) s.prefetch_latency = k.prefetch;
  if (k.pack1x1) s.pack_1x1 = true;
  if (k.fixedPoint) s.fixed_point_16bit = true;
  if (k.clockMhz !== null) s.clock_mhz = k.clockMhz;
  return s;
}

export interface CycleBar {
  name: string;
  cycles: number;
  fraction: number; // of the largest layer in this response
}

export function cycleBars(doc: EstimateResponse): CycleBar[] {
  const active = (l: EstimateResponse["layers"][number]) =>
    doc.flushing ? l.flushed_cycles : l.ideal_cycles;
  const peak = Math.max(1, ...doc.layers.map(active));
  return doc.layers.map((l) => ({
    name: l.name,
    cycles: active(l),
    fraction: active(l) / peak,
  }));
}

export function fmtMs(ms: number): string {
  return ms >= 100 ? ms.toFixed(1) + " ms" : ms.toFixed(2) + " ms";
}

export function fmtFps(fps: number): string {
  return fps.toFixed(2) + " fps";
}

export function summaryLine(doc: EstimateResponse): string {
  const mode = doc.flushing ? "flushed" : "pipelined";
  return `${fmtFps(doc.fps)} · ${fmtMs(doc.t_frame_ms)} per frame · ${mode} @ ${doc.clock_mhz} MHz`;
}
