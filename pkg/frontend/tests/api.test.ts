import { describe, expect, it, vi } from "vitest";
import { ApiClient, ApiError } from "../src/api.js";

type Handler = (url: string, init?: RequestInit) => Response | Promise<Response>;

function client(handler: Handler): ApiClient {
  return new ApiClient("", (input, init) =>
    Promise.resolve(handler(String(input), init)),
  );
}

const json = (body: unknown, status = 200, headers: Record<string, string> = {}) =>
  new Response(JSON.stringify(body), {
    status,
    headers: { "content-type": "application/json", ...headers },
  });

describe("request plumbing", () => {
  it("creates a session from a multipart upload", async () => {
    const calls: Array<[string, RequestInit | undefined]> = [];
    const api = client((url, init) => {
      calls.push([url, init]);
      return json({ id: "s1", state: "created" }, 202);
    });
    const id = await api.createSession(new Blob([1, 2, 3] as never), { epochs: 2 });
    expect(id).toBe("s1");
    expect(calls[0][0]).toBe("/sessions");
    expect(calls[0][1]?.method).toBe("POST");
    const form = calls[0][1]?.body as FormData;
    expect(form.get("config")).toBe('{"epochs":2}');
  });

  it("surfaces server error detail as ApiError", async () => {
    const api = client(() => json({ detail: "image too large" }, 413));
    await expect(api.createSession(new Blob())).rejects.toThrowError(ApiError);
    await expect(api.createSession(new Blob())).rejects.toThrow("image too large");
  });

  it("reads result dimensions from response headers", async () => {
    const api = client(() =>
      new Response(new Blob([new Uint8Array(4)]), {
        status: 200,
        headers: { "x-width": "32", "x-height": "16", "x-variant": "refiltered" },
      }),
    );
    const img = await api.getResult("s1", "refiltered");
    expect(img.width).toBe(32);
    expect(img.height).toBe(16);
    expect(img.variant).toBe("refiltered");
  });
});

describe("training poll loop", () => {
  it("polls until ready and reports progress", async () => {
    vi.useFakeTimers();
    try {
      let n = 0;
      const api = client(() => {
        n += 1;
        const done = n >= 3;
        return json({
          id: "s1",
          state: done ? "ready" : "training",
          progress: { epoch: n, epochs: 3 },
          loss_tail: [],
          error: null,
        });
      });
      const seen: number[] = [];
      const p = api.pollUntilSettled("s1", (d) => seen.push(d.progress.epoch), 500);
      await vi.advanceTimersByTimeAsync(5000);
      const doc = await p;
      expect(doc.state).toBe("ready");
      expect(seen).toEqual([1, 2, 3]);
    } finally {
      vi.useRealTimers();
    }
  });

  it("retries transient network failures with backoff, then gives up", async () => {
    vi.useFakeTimers();
    try {
      const api = client(() => {
        throw new TypeError("network down");
      });
      const p = api.pollUntilSettled("s1", undefined, 10, 2);
      const expectation = expect(p).rejects.toThrow("network down");
      await vi.advanceTimersByTimeAsync(10_000);
      await expectation;
    } finally {
      vi.useRealTimers();
    }
  });

  it("does not retry HTTP errors like 404", async () => {
    let calls = 0;
    const api = client(() => {
      calls += 1;
      return json({ detail: "no such session" }, 404);
    });
    await expect(api.pollUntilSettled("nope")).rejects.toThrowError(ApiError);
    expect(calls).toBe(1);
  });
});

describe("mutating-request queue", () => {
  it("runs one mutating request per session at a time, in order", async () => {
    const log: string[] = [];
    let release: (() => void) | null = null;
    const api = client(async (url) => {
      log.push(`start ${url}`);
      if (!release) {
        await new Promise<void>((r) => (release = r));
      }
      log.push(`end ${url}`);
      return json({ status: "ok" });
    });

    const p1 = api.patchSigma("s1", { reset: true });
    const p2 = api.refilter("s1");
    await Promise.resolve(); // let the first request start
    expect(log).toEqual(["start /sessions/s1/sigma"]);
    release!();
    await Promise.all([p1, p2]);
    expect(log).toEqual([
      "start /sessions/s1/sigma",
      "end /sessions/s1/sigma",
      "start /sessions/s1/refilter",
      "end /sessions/s1/refilter",
    ]);
  });

  it("continues the queue after a failed request", async () => {
    let n = 0;
    const api = client(() => {
      n += 1;
      return n === 1 ? json({ detail: "bad edit" }, 422) : json({ status: "ok" });
    });
    await expect(api.patchSigma("s1", [])).rejects.toThrow("bad edit");
    await expect(api.refilter("s1")).resolves.toBeUndefined();
  });
});
