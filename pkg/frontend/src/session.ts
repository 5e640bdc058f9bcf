/** Client-side state for one dashboard view of one instance.
 *
 * Everything here is a projection of server responses; the session never
 * invents numbers.  A null entry in the residual series marks a stream gap
 * so charts can break the line there.
 */

import type { FeedEvent } from "./events";
import type { AnalyticsDoc, ReadoutDoc, ResidualRow, WorkerInfo } from "./types";

export interface ResidualPoint {
  t: number;
  updates: number;
  residual: number;
}

export interface Contribution {
  wid: string;
  platform: string;
  updates: number;
  fraction: number;
}

export interface PlatformSlice {
  platform: string;
  updates: number;
}

const SERIES_CAP = 4000;

export class DashboardSession {
  status = "unknown";
  epoch = 0;
  rho: number | null = null;
  updatesTotal = 0;
  workers: WorkerInfo[] = [];
  updatesByWorker: Record<string, number> = {};
  series: Array<ResidualPoint | null> = [];
  lastReadout: ReadoutDoc | null = null;

  constructor(
    public endpoint: string,
    public pid: string,
  ) {}

  apply(ev: FeedEvent): void {
    switch (ev.type) {
      case "residual":
        this.pushPoint({ t: ev.t, updates: ev.updates, residual: ev.residual });
        this.updatesTotal = ev.updates;
        this.epoch = ev.epoch;
        break;
      case "status":
        this.status = ev.status;
        this.epoch = ev.epoch;
        this.rho = ev.rho;
        break;
      case "analytics":
        this.applyAnalytics(ev.doc);
        break;
      case "gap":
        if (this.series.length > 0 && this.series[this.series.length - 1] !== null) {
          this.series.push(null);
        }
        break;
    }
  }

  applyAnalytics(doc: AnalyticsDoc): void {
    this.updatesTotal = doc.updates_total;
    this.updatesByWorker = doc.updates_by_worker;
    this.workers = doc.workers;
    this.status = doc.status;
    this.epoch = doc.epoch;
    this.rho = doc.rho;
  }

  applyReadout(doc: ReadoutDoc): void {
    this.lastReadout = doc;
  }

  /** Seed the chart from the rows of GET residual?series=1. */
  seedSeries(rows: ResidualRow[]): void {
    this.series = rows.map(({ t, updates, residual }) => ({ t, updates, residual }));
    this.trim();
  }

  residualPoints(): ResidualPoint[] {
    return this.series.filter((p): p is ResidualPoint => p !== null);
  }

  contributions(): Contribution[] {
    const total = Math.max(1, this.updatesTotal);
    return this.workers
      .map((w) => ({
        wid: w.wid,
        platform: w.platform,
        updates: this.updatesByWorker[w.wid] ?? w.updates,
        fraction: (this.updatesByWorker[w.wid] ?? w.updates) / total,
      }))
      .sort((a, b) => b.updates - a.updates);
  }

  platformBreakdown(): PlatformSlice[] {
    const acc = new Map<string, number>();
    for (const w of this.workers) {
      const n = this.updatesByWorker[w.wid] ?? w.updates;
      acc.set(w.platform, (acc.get(w.platform) ?? 0) + n);
    }
    return [...acc.entries()]
      .map(([platform, updates]) => ({ platform, updates }))
      .sort((a, b) => b.updates - a.updates);
  }

  private pushPoint(p: ResidualPoint): void {
    this.series.push(p);
    this.trim();
  }

  private trim(): void {
    if (this.series.length > SERIES_CAP) {
      this.series.splice(0, this.series.length - SERIES_CAP);
    }
  }
}
