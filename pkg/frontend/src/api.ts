/** Typed client for the denoiser service REST API.
 *
 * The UI performs no domain math; every number it shows comes from these
 * endpoints. Mutating requests for a given session are serialized
 * client-side (one in flight at a time).
 */

export type SessionState = "created" | "training" | "ready" | "failed";

export interface SessionDoc {
  id: string;
  state: SessionState;
  progress: { epoch: number; epochs: number };
  loss_tail: number[];
  error: string | null;
}

export interface SigmaDoc {
  stage: number;
  grid: [number, number];
  patch_size: number;
  sigma_r: number[];
  sigma_x: number[];
  sigma_y: number[];
  edited: { sigma_r: number[]; sigma_x: number[]; sigma_y: number[] };
}

export interface SigmaEdit {
  stage: number;
  region: [number, number, number, number];
  multiplier_r?: number;
  multiplier_x?: number;
  multiplier_y?: number;
  clamp_max?: { r?: number; x?: number; y?: number };
}

export interface MetricsDoc {
  cnr_input: number;
  cnr_denoised: number;
  cnr_refiltered: number;
}

export interface ResultImage {
  width: number;
  height: number;
  variant: string;
  blob: Blob;
}

export class ApiError extends Error {
  constructor(public status: number, message: string) {
    super(message);
  }
}

type FetchFn = typeof fetch;

const sleep = (ms: number) => new Promise((r) => setTimeout(r, ms));

export class ApiClient {
  private mutateQueue = new Map<string, Promise<unknown>>();

  constructor(
    public baseUrl = "",
    private fetchFn: FetchFn = (...a) => fetch(...a),
  ) {}

  private async request(path: string, init?: RequestInit): Promise<Response> {
    const resp = await this.fetchFn(this.baseUrl + path, init);
    if (!resp.ok) {
      let detail = resp.statusText;
      try {
        const body = await resp.json();
        if (body && body.detail) detail = String(body.detail);
      } catch {
        /* non-JSON error body */
      }
      throw new ApiError(resp.status, detail);
    }
    return resp;
  }

  /** Serialize mutating calls per session so edits never race refilters. */
  private enqueue<T>(sid: string, job: () => Promise<T>): Promise<T> {
    const tail = this.mutateQueue.get(sid) ?? Promise.resolve();
    const next = tail.then(job, job);
    this.mutateQueue.set(sid, next.catch(() => undefined));
    return next;
  }

  async createSession(file: Blob, config?: object): Promise<string> {
    const form = new FormData();
    form.append("image", file);
    if (config) form.append("config", JSON.stringify(config));
    const resp = await this.request("/sessions", { method: "POST", body: form });
    return (await resp.json()).id as string;
  }

  async getSession(sid: string): Promise<SessionDoc> {
    return (await this.request(`/sessions/${sid}`)).json();
  }

  /** Poll until the session settles, retrying transient network errors
   *  with backoff. onProgress fires on every successful poll. */
  async pollUntilSettled(
    sid: string,
    onProgress?: (doc: SessionDoc) => void,
    pollMs = 500,
    maxRetries = 5,
  ): Promise<SessionDoc> {
    let retries = 0;
    for (;;) {
      let doc: SessionDoc;
      try {
        doc = await this.getSession(sid);
        retries = 0;
      } catch (e) {
        if (e instanceof ApiError) throw e;
        if (++retries > maxRetries) throw e;
        await sleep(pollMs * 2 ** retries);
        continue;
      }
      if (onProgress) onProgress(doc);
      if (doc.state === "ready" || doc.state === "failed") return doc;
      await sleep(pollMs);
    }
  }

  async getResult(
    sid: string,
    variant: "denoised" | "refiltered" = "denoised",
  ): Promise<ResultImage> {
    const resp = await this.request(`/sessions/${sid}/result?variant=${variant}`);
    return {
      width: Number(resp.headers.get("x-width")),
      height: Number(resp.headers.get("x-height")),
      variant: resp.headers.get("x-variant") ?? variant,
      blob: await resp.blob(),
    };
  }

  async getSigma(sid: string, stage: number): Promise<SigmaDoc> {
    return (await this.request(`/sessions/${sid}/sigma/${stage}`)).json();
  }

  patchSigma(sid: string, body: SigmaEdit[] | { reset: true }): Promise<void> {
    return this.enqueue(sid, async () => {
      await this.request(`/sessions/${sid}/sigma`, {
        method: "PATCH",
        headers: { "content-type": "application/json" },
        body: JSON.stringify(body),
      });
    });
  }

  refilter(sid: string): Promise<void> {
    return this.enqueue(sid, async () => {
      await this.request(`/sessions/${sid}/refilter`, { method: "POST" });
    });
  }

  async getMetrics(
    sid: string,
    roiSignal: [number, number, number, number],
    roiBg: [number, number, number, number],
  ): Promise<MetricsDoc> {
    const q = `roiSignal=${roiSignal.join(",")}&roiBg=${roiBg.join(",")}`;
    return (await this.request(`/sessions/${sid}/metrics?${q}`)).json();
  }
}
