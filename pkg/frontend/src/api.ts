/** Thin REST client for the problem store.
 *
 * Coordinate indices are 0-based in this module and converted to the wire's
 * 1-based form at the call boundary, matching the native worker client.
 * Failed writes are surfaced to the caller; nothing here retries silently.
 */

import type {
  AnalyticsDoc,
  MetaDoc,
  ProblemEntry,
  ReadoutDoc,
  ResidualSample,
  ResidualSeriesDoc,
  SnapshotDoc,
  SystemDoc,
  VarDoc,
} from "./types";

export class ApiError extends Error {
  constructor(
    public status: number,
    public code: string,
    message: string,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

export class TransportError extends Error {
  constructor(message: string) {
    super(message);
    this.name = "TransportError";
  }
}

export type ControlAction = "pause" | "resume" | "reset" | "delete" | "set_rho";

export class StoreApi {
  readonly endpoint: string;
  private fetchFn: typeof fetch;

  constructor(endpoint: string, fetchFn?: typeof fetch) {
    this.endpoint = endpoint.replace(/\/+$/, "");
    this.fetchFn = fetchFn ?? fetch.bind(globalThis);
  }

  private async request<T>(
    method: string,
    path: string,
    body?: unknown,
  ): Promise<T> {
    let resp: Response;
    try {
      resp = await this.fetchFn(`${this.endpoint}${path}`, {
        method,
        headers: body === undefined ? {} : { "content-type": "application/json" },
        body: body === undefined ? undefined : JSON.stringify(body),
      });
    } catch (err) {
      throw new TransportError(String(err));
    }
    let doc: unknown = null;
    try {
      doc = await resp.json();
    } catch {
      doc = null;
    }
    if (!resp.ok) {
      const e = (doc as { error?: { code?: string; message?: string } })?.error;
      throw new ApiError(
        resp.status,
        e?.code ?? "error",
        e?.message ?? `HTTP ${resp.status}`,
      );
    }
    return doc as T;
  }

  listProblems(): Promise<{ problems: ProblemEntry[] }> {
    return this.request("GET", "/v1/problems");
  }

  createProblem(
    system: SystemDoc,
    opts: { meta?: Record<string, unknown>; rho?: number; requestId?: string } = {},
  ): Promise<{ pid: string }> {
    const body: Record<string, unknown> = { system };
    if (opts.meta !== undefined) body.meta = opts.meta;
    if (opts.rho !== undefined) body.rho = opts.rho;
    if (opts.requestId !== undefined) body.request_id = opts.requestId;
    return this.request("POST", "/v1/problems", body);
  }

  meta(pid: string): Promise<MetaDoc> {
    return this.request("GET", `/v1/problems/${pid}/meta`);
  }

  control(
    pid: string,
    action: ControlAction,
    value?: number,
  ): Promise<Record<string, unknown>> {
    const body: Record<string, unknown> = { action };
    if (value !== undefined) body.value = value;
    return this.request("POST", `/v1/problems/${pid}/control`, body);
  }

  registerWorker(pid: string, platform: string): Promise<{ wid: string }> {
    return this.request("POST", `/v1/problems/${pid}/workers`, { platform });
  }

  snapshot(pid: string): Promise<SnapshotDoc> {
    return this.request("GET", `/v1/problems/${pid}/c`);
  }

  /** Coordinate data for 0-based index j (sent 1-based on the wire). */
  varSlot(pid: string, j: number): Promise<VarDoc> {
    return this.request("GET", `/v1/problems/${pid}/var/${j + 1}`);
  }

  /** Write one 0-based coordinate (sent 1-based on the wire). */
  writeC(
    pid: string,
    j: number,
    value: number,
    wid: string,
  ): Promise<{ ok: boolean; epoch: number }> {
    return this.request("PUT", `/v1/problems/${pid}/c/${j + 1}`, { value, wid });
  }

  analytics(pid: string): Promise<AnalyticsDoc> {
    return this.request("GET", `/v1/problems/${pid}/analytics`);
  }

  residualLatest(pid: string): Promise<ResidualSample> {
    return this.request("GET", `/v1/problems/${pid}/residual`);
  }

  residualSeries(pid: string): Promise<ResidualSeriesDoc> {
    return this.request("GET", `/v1/problems/${pid}/residual?series=1`);
  }

  readout(pid: string): Promise<ReadoutDoc> {
    return this.request("GET", `/v1/problems/${pid}/readout`);
  }

  observe(pid: string, y: number[]): Promise<{ epoch: number }> {
    return this.request("POST", `/v1/problems/${pid}/observation`, { y });
  }

  eventsUrl(pid: string): string {
    return `${this.endpoint}/v1/problems/${pid}/events`;
  }
}
