/** Payload shapes of the JSON API. Mirrors the service contract 1:1. */

export interface SourceSpan {
  line: number;
  col: number;
  length: number;
}

export interface Diagnostic {
  severity: "error" | "warning";
  rule: string;
  layer: string;
  message: string;
  span?: SourceSpan;
}

export interface LayerRow {
  name: string;
  kind: string;
  ch_out: number;
  h_out: number;
  w_out: number;
  macc: number;
  comp: number;
  add: number;
  div: number;
  exp: number;
  params: number;
  activations: number;
  bottoms: string[];
}

export interface GroupRow {
  name: string;
  macc: number;
  comp: number;
  add: number;
  div: number;
  exp: number;
  params: number;
  activations: number;
}

export interface AnalyzeResponse {
  layers: LayerRow[];
  modules: GroupRow[];
  totals: GroupRow;
  diagnostics: Diagnostic[];
}

export interface Scenario {
  flush_fixed?: boolean;
  prefetch_latency?: number;
  pack_1x1?: boolean;
  fixed_point_16bit?: boolean;
  clock_mhz?: number;
}

export interface LayerCycles {
  name: string;
  iterations: number;
  compute_cycles_per_iter: number;
  ideal_cycles: number;
  flushed_cycles: number;
  weight_load_cycles: number;
  writeback_cycles: number;
}

export interface EstimateResponse {
  layers: LayerCycles[];
  ideal_total: number;
  flushed_total: number;
  slowdown_factor: number;
  flushing: boolean;
  clock_mhz: number;
  total_cycles: number;
  t_frame_ms: number;
  fps: number;
  scenario: {
    flush_fixed: boolean;
    prefetch_latency: number | null;
    pack_1x1: boolean;
    fixed_point_16bit: boolean;
    clock_mhz: number | null;
  };
}

export interface ApiErrorBody {
  error: {
    code: string;
    message: string;
    span?: SourceSpan;
  };
}

export interface PresetsResponse {
  presets: Record<string, string>;
}
