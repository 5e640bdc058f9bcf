/** In-browser worker: the same single-coordinate protocol native workers
 * speak, so its writes are indistinguishable at the store.
 *
 * One round = fetch the shared snapshot once, then for each of `batch`
 * coordinates fetch that coordinate's data (cached per epoch), evaluate the
 * damped update and PUT it back, folding the write into the local snapshot.
 */

import { ApiError, StoreApi, TransportError } from "./api";
import { evalMap } from "./maps";
import type { VarDoc } from "./types";

export interface BrowserWorkerOptions {
  /** Damping in (0, 1]; omitted means follow the store's value. */
  rho?: number | null;
  batch?: number;
  platform?: string;
  /** Rounds between refreshes of a store-provided rho. */
  pollEvery?: number;
  pickIndex?: (K: number) => number;
  sleep?: (ms: number) => Promise<void>;
}

export interface WorkerStats {
  updates: number;
  rounds: number;
  epoch: number;
  wid: string | null;
  state: "running" | "paused" | "stopped";
}

export interface RunOptions {
  shouldStop?: () => boolean;
  maxUpdates?: number;
  onStats?: (s: WorkerStats) => void;
}

function defaultSleep(ms: number): Promise<void> {
  return new Promise((resolve) => setTimeout(resolve, ms));
}

export function defaultPlatform(): string {
  const ua =
    typeof navigator !== "undefined" ? navigator.userAgent : "unknown";
  const m = /(firefox|chrome|safari|edg)\/[\d.]+/i.exec(ua);
  return `browser/${m ? m[0].toLowerCase() : "unknown"}`;
}

/** One damped update of coordinate j from a snapshot, mirroring the native
 * worker step. */
export function workerStep(
  c: number[],
  j: number,
  varDoc: VarDoc,
  rho: number,
): number {
  if (!(rho > 0) || rho > 1) {
    throw new Error("rho must lie in (0, 1]");
  }
  const g = varDoc.Grow;
  if (g.length !== c.length) {
    throw new Error("snapshot and coordinate row disagree on length");
  }
  let d = varDoc.f;
  for (let i = 0; i < g.length; i++) {
    d += g[i] * c[i];
  }
  const target = evalMap(varDoc.m, d);
  return rho === 1 ? target : rho * target + (1 - rho) * c[j];
}

export class BrowserWorker {
  wid: string | null = null;
  updates = 0;
  rounds = 0;
  private rho: number;
  private readonly fixedRho: boolean;
  private readonly batch: number;
  private readonly platform: string;
  private readonly pollEvery: number;
  private readonly pickIndex: (K: number) => number;
  private readonly sleep: (ms: number) => Promise<void>;
  private varCache = new Map<number, VarDoc>();
  private cacheEpoch = -1;
  private state: "running" | "paused" | "stopped" = "stopped";

  constructor(
    private api: StoreApi,
    private pid: string,
    opts: BrowserWorkerOptions = {},
  ) {
    this.fixedRho = opts.rho !== undefined && opts.rho !== null;
    this.rho = this.fixedRho ? (opts.rho as number) : 1;
    this.batch = Math.max(1, opts.batch ?? 8);
    this.platform = opts.platform ?? defaultPlatform();
    this.pollEvery = Math.max(1, opts.pollEvery ?? 50);
    this.pickIndex = opts.pickIndex ?? ((K) => Math.floor(Math.random() * K));
    this.sleep = opts.sleep ?? defaultSleep;
    if (this.fixedRho && (!(this.rho > 0) || this.rho > 1)) {
      throw new Error("rho must lie in (0, 1]");
    }
  }

  async register(): Promise<string> {
    const { wid } = await this.api.registerWorker(this.pid, this.platform);
    this.wid = wid;
    if (!this.fixedRho) {
      const meta = await this.api.meta(this.pid);
      this.rho = meta.rho;
    }
    return wid;
  }

  private async varSlot(j: number, epoch: number): Promise<VarDoc> {
    if (epoch !== this.cacheEpoch) {
      this.varCache.clear();
      this.cacheEpoch = epoch;
    }
    const hit = this.varCache.get(j);
    if (hit !== undefined) return hit;
    const doc = await this.api.varSlot(this.pid, j);
    this.varCache.set(j, doc);
    return doc;
  }

  /** One stale-snapshot round; returns the number of accepted writes. */
  async round(): Promise<number> {
    const snap = await this.api.snapshot(this.pid);
    const c = snap.values.slice();
    const K = c.length;
    let accepted = 0;
    for (let k = 0; k < this.batch; k++) {
      const j = this.pickIndex(K);
      const varDoc = await this.varSlot(j, snap.epoch);
      const value = workerStep(c, j, varDoc, this.rho);
      await this.api.writeC(this.pid, j, value, this.wid as string);
      c[j] = value;
      accepted += 1;
      this.updates += 1;
    }
    return accepted;
  }

  currentStats(): WorkerStats {
    return {
      updates: this.updates,
      rounds: this.rounds,
      epoch: this.cacheEpoch,
      wid: this.wid,
      state: this.state,
    };
  }

  async run(opts: RunOptions = {}): Promise<number> {
    const shouldStop = opts.shouldStop ?? (() => false);
    this.state = "running";
    let backoff = 50;
    while (!shouldStop()) {
      if (opts.maxUpdates !== undefined && this.updates >= opts.maxUpdates) {
        break;
      }
      try {
        if (this.wid === null) {
          await this.register();
        }
        this.rounds += 1;
        if (!this.fixedRho && this.rounds % this.pollEvery === 0) {
          const meta = await this.api.meta(this.pid);
          this.rho = meta.rho;
        }
        await this.round();
        this.state = "running";
        backoff = 50;
      } catch (err) {
        if (err instanceof TransportError) {
          await this.sleep(backoff);
          backoff = Math.min(backoff * 2, 2000);
        } else if (err instanceof ApiError && err.status === 404) {
          break;
        } else if (err instanceof ApiError && err.status === 409) {
          this.state = "paused";
          opts.onStats?.(this.currentStats());
          await this.sleep(200);
        } else if (err instanceof ApiError && err.status === 403) {
          this.wid = null;
        } else {
          throw err;
        }
        continue;
      }
      opts.onStats?.(this.currentStats());
    }
    this.state = "stopped";
    opts.onStats?.(this.currentStats());
    return this.updates;
  }
}
