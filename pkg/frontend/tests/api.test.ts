import { describe, it, expect, vi, afterEach } from "vitest";
import { ApiClient, ApiError, NewestWins } from "../src/api.js";

function jsonResponse(status: number, body: unknown): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { "Content-Type": "application/json" },
  });
}

afterEach(() => {
  vi.unstubAllGlobals();
});

describe("request shape", () => {
  it("posts the prototxt to /api/analyze as json", async () => {
    const fetchMock = vi.fn(async () =>
      jsonResponse(200, { layers: [], modules: [], totals: {}, diagnostics: [] }),
    );
    vi.stubGlobal("fetch", fetchMock);
    await new ApiClient("http://h:1").analyze("layer {}");
    expect(fetchMock).toHaveBeenCalledOnce();
    const [url, init] = fetchMock.mock.calls[0]! as unknown as [string, RequestInit];
    expect(url).toBe("http://h:1/api/analyze");
    expect(init.method).toBe("POST");
    expect(JSON.parse(init.body as string)).toEqual({ prototxt: "layer {}" });
    expect((init.headers as Record<string, string>)["Content-Type"]).toBe(
      "application/json",
    );
  });

  it("sends the scenario alongside the text for estimates", async () => {
    const fetchMock = vi.fn(async () => jsonResponse(200, {}));
    vi.stubGlobal("fetch", fetchMock);
    await new ApiClient().estimate("x", { flush_fixed: true, clock_mhz: 200 });
    const [, init] = fetchMock.mock.calls[0]! as unknown as [string, RequestInit];
    expect(JSON.parse(init.body as string)).toEqual({
      prototxt: "x",
      scenario: { flush_fixed: true, clock_mhz: 200 },
    });
  });
});

describe("error unwrapping", () => {
  it("lifts the service error envelope into ApiError", async () => {
    vi.stubGlobal(
      "fetch",
      vi.fn(async () =>
        jsonResponse(400, {
          error: {
            code: "SyntaxError",
            message: "unbalanced brace",
            span: { line: 3, col: 7, length: 1 },
          },
        }),
      ),
    );
    const err = await new ApiClient().analyze("layer {").catch((e) => e);
    expect(err).toBeInstanceOf(ApiError);
    expect(err.status).toBe(400);
    expect(err.code).toBe("SyntaxError");
    expect(err.message).toBe("unbalanced brace");
    expect(err.span).toEqual({ line: 3, col: 7, length: 1 });
  });

  it("falls back to the status line for non-json error bodies", async () => {
    vi.stubGlobal(
      "fetch",
      vi.fn(async () => new Response("<h1>boom</h1>", { status: 502, statusText: "Bad Gateway" })),
    );
    const err = await new ApiClient().analyze("x").catch((e) => e);
    expect(err).toBeInstanceOf(ApiError);
    expect(err.status).toBe(502);
    expect(err.code).toBe("HttpError");
    expect(err.message).toContain("502");
  });
});

describe("newest wins", () => {
  it("aborts the in-flight request when a newer one starts", async () => {
    const queue = new NewestWins();
    const aborted: boolean[] = [];
    let releaseFirst!: () => void;
    const first = queue.run(
      (signal) =>
        new Promise<string>((resolve) => {
          signal.addEventListener("abort", () => aborted.push(true));
          releaseFirst = () => resolve("first");
        }),
    );
    const second = queue.run(async () => "second");
    expect(await second).toBe("second");
    expect(aborted).toEqual([true]);
    releaseFirst();
    expect(await first).toBeNull();
  });

  it("returns the result when nothing supersedes it", async () => {
    const queue = new NewestWins();
    expect(await queue.run(async () => 42)).toBe(42);
  });

  it("maps an abort rejection to null instead of an error", async () => {
    const queue = new NewestWins();
    const first = queue.run(
      (signal) =>
        new Promise((_, reject) => {
          signal.addEventListener("abort", () => reject(new Error("aborted")));
        }),
    );
    await queue.run(async () => "x");
    expect(await first).toBeNull();
  });

  it("propagates real failures from the newest request", async () => {
    const queue = new NewestWins();
    await expect(
      queue.run(async () => {
        throw new ApiError(400, "Bad", "nope");
      }),
    ).rejects.toThrow("nope");
  });
});
