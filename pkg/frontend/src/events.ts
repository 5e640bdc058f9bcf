/** Live event feed for one instance.
 *
 * Prefers the server-sent-events stream; on stream errors it emits a gap
 * marker (so charts can show the discontinuity instead of papering over it)
 * and reconnects with a delay.  After repeated failures, or when EventSource
 * does not exist at all, it degrades to polling the REST endpoints.
 */

import type { StoreApi } from "./api";
import type { AnalyticsDoc } from "./types";

export type FeedEvent =
  | { type: "residual"; t: number; updates: number; residual: number; epoch: number }
  | { type: "status"; status: string; epoch: number; rho: number }
  | { type: "analytics"; doc: AnalyticsDoc }
  | { type: "gap" };

export interface FeedOptions {
  /** Injected for tests; defaults to the global EventSource when present. */
  eventSourceImpl?: (new (url: string) => EventSource) | null;
  reconnectMs?: number;
  pollMs?: number;
  /** Stream errors tolerated before falling back to polling. */
  maxStreamFailures?: number;
}

export class LiveFeed {
  mode: "stream" | "poll" | "stopped" = "stopped";
  private es: EventSource | null = null;
  private pollTimer: ReturnType<typeof setInterval> | null = null;
  private reconnectTimer: ReturnType<typeof setTimeout> | null = null;
  private failures = 0;
  private lastUpdates = -1;
  private readonly esImpl: (new (url: string) => EventSource) | null;
  private readonly reconnectMs: number;
  private readonly pollMs: number;
  private readonly maxFailures: number;

  constructor(
    private api: StoreApi,
    private pid: string,
    private onEvent: (ev: FeedEvent) => void,
    opts: FeedOptions = {},
  ) {
    this.esImpl =
      opts.eventSourceImpl !== undefined
        ? opts.eventSourceImpl
        : typeof EventSource === "undefined"
          ? null
          : EventSource;
    this.reconnectMs = opts.reconnectMs ?? 1000;
    this.pollMs = opts.pollMs ?? 1000;
    this.maxFailures = opts.maxStreamFailures ?? 3;
  }

  start(): void {
    if (this.mode !== "stopped") return;
    if (this.esImpl === null) {
      this.startPolling();
    } else {
      this.openStream();
    }
  }

  stop(): void {
    this.mode = "stopped";
    if (this.es) {
      this.es.close();
      this.es = null;
    }
    if (this.pollTimer !== null) {
      clearInterval(this.pollTimer);
      this.pollTimer = null;
    }
    if (this.reconnectTimer !== null) {
      clearTimeout(this.reconnectTimer);
      this.reconnectTimer = null;
    }
  }

  private openStream(): void {
    this.mode = "stream";
    const impl = this.esImpl as new (url: string) => EventSource;
    const es = new impl(this.api.eventsUrl(this.pid));
    this.es = es;
    es.addEventListener("residual", (ev) => {
      this.failures = 0;
      const d = JSON.parse((ev as MessageEvent).data);
      this.onEvent({
        type: "residual",
        t: d.t,
        updates: d.updates,
        residual: d.residual,
        epoch: d.epoch,
      });
    });
    es.addEventListener("status", (ev) => {
      this.failures = 0;
      const d = JSON.parse((ev as MessageEvent).data);
      this.onEvent({
        type: "status",
        status: d.status,
        epoch: d.epoch,
        rho: d.rho,
      });
    });
    es.addEventListener("analytics", (ev) => {
      this.failures = 0;
      const d = JSON.parse((ev as MessageEvent).data);
      this.onEvent({ type: "analytics", doc: d });
    });
    es.onerror = () => {
      if (this.mode !== "stream") return;
      es.close();
      this.es = null;
      this.failures += 1;
      this.onEvent({ type: "gap" });
      if (this.failures >= this.maxFailures) {
        this.startPolling();
      } else {
        this.reconnectTimer = setTimeout(() => {
          if (this.mode === "stream") this.openStream();
        }, this.reconnectMs);
        this.mode = "stream";
      }
    };
  }

  private startPolling(): void {
    this.mode = "poll";
    const tick = async () => {
      if (this.mode !== "poll") return;
      try {
        const s = await this.api.residualLatest(this.pid);
        if (s.residual !== null && s.updates !== this.lastUpdates) {
          this.lastUpdates = s.updates;
          const meta = await this.api.meta(this.pid);
          this.onEvent({
            type: "residual",
            t: s.t ?? Date.now() / 1000,
            updates: s.updates,
            residual: s.residual,
            epoch: meta.epoch,
          });
        }
      } catch {
        // Poll errors are transient by assumption; the next tick retries.
      }
    };
    void tick();
    this.pollTimer = setInterval(() => void tick(), this.pollMs);
  }
}
