/** Typed client for the JSON service. No analysis logic lives here. */

import type {
  AnalyzeResponse,
  ApiErrorBody,
  Diagnostic,
  EstimateResponse,
  PresetsResponse,
  Scenario,
  SourceSpan,
} from "./types.js";

export class ApiError extends Error {
  readonly code: string;
  readonly span?: SourceSpan;
  readonly status: number;

  constructor(status: number, code: string, message: string, span?: SourceSpan) {
    super(message);
    this.status = status;
    this.code = code;
    this.span = span;
  }
}

async function post<T>(
  base: string,
  path: string,
  body: unknown,
  signal?: AbortSignal,
): Promise<T> {
  const resp = await fetch(base + path, {
    method: "POST",
    headers: { "Content-Type": "application/json" },
    body: JSON.stringify(body),
    signal,
  });
  if (!resp.ok) {
    let code = "HttpError";
    let message = `${resp.status} ${resp.statusText}`;
    let span: SourceSpan | undefined;
    try {
      const doc = (await resp.json()) as ApiErrorBody;
      code = doc.error.code;
      message = doc.error.message;
      span = doc.error.span;
    } catch {
      // non-JSON error body; keep the HTTP status text
    }
    throw new ApiError(resp.status, code, message, span);
  }
  return (await resp.json()) as T;
}

export class ApiClient {
  constructor(readonly base: string = "") {}

  analyze(prototxt: string, signal?: AbortSignal): Promise<AnalyzeResponse> {
    return post(this.base, "/api/analyze", { prototxt }, signal);
  }

  estimate(
    prototxt: string,
    scenario: Scenario,
    signal?: AbortSignal,
  ): Promise<EstimateResponse> {
    return post(this.base, "/api/estimate", { prototxt, scenario }, signal);
  }

  validate(
    prototxt: string,
    signal?: AbortSignal,
  ): Promise<{ diagnostics: Diagnostic[] }> {
    return post(this.base, "/api/validate", { prototxt }, signal);
  }

  async presets(): Promise<PresetsResponse> {
    const resp = await fetch(this.base + "/api/presets");
    if (!resp.ok) {
      throw new ApiError(resp.status, "HttpError", resp.statusText);
    }
    return (await resp.json()) as PresetsResponse;
  }
}

/**
 * Serializes requests so only the newest one lands: starting a new call
 * aborts the in-flight one, and a stale response (aborted or superseded)
 * resolves to null instead of clobbering newer state.
 */
export class NewestWins {
  private controller: AbortController | null = null;
  private generation = 0;

  async run<T>(fn: (signal: AbortSignal) => Promise<T>): Promise<T | null> {
    this.controller?.abort();
    const controller = new AbortController();
    this.controller = controller;
    const mine = ++this.generation;
    try {
      const result = await fn(controller.signal);
      return mine === this.generation ? result : null;
    } catch (err) {
      if (controller.signal.aborted) {
        return null;
      }
      throw err;
    }
  }
}
