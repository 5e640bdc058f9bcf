import { describe, expect, it } from "vitest";

import { DashboardSession } from "../src/session";
import type { AnalyticsDoc } from "../src/types";

function analytics(partial: Partial<AnalyticsDoc> = {}): AnalyticsDoc {
  return {
    updates_total: 30,
    updates_by_worker: { "w-a": 20, "w-b": 10 },
    workers: [
      { wid: "w-a", platform: "python/3.10 linux", registered_at: 1, updates: 20 },
      { wid: "w-b", platform: "browser/chrome/1.0", registered_at: 2, updates: 10 },
    ],
    residual: 0.5,
    epoch: 0,
    status: "running",
    rho: 0.5,
    uptime_s: 3,
    ...partial,
  };
}

describe("DashboardSession", () => {
  it("accumulates residual points from the feed", () => {
    const s = new DashboardSession("http://h:1", "p1");
    s.apply({ type: "residual", t: 1, updates: 2, residual: 0.5, epoch: 0 });
    s.apply({ type: "residual", t: 2, updates: 4, residual: 0.25, epoch: 0 });
    expect(s.residualPoints().map((p) => p.residual)).toEqual([0.5, 0.25]);
    expect(s.updatesTotal).toBe(4);
  });

  it("records gaps once and skips them in point views", () => {
    const s = new DashboardSession("http://h:1", "p1");
    s.apply({ type: "residual", t: 1, updates: 1, residual: 1, epoch: 0 });
    s.apply({ type: "gap" });
    s.apply({ type: "gap" });
    s.apply({ type: "residual", t: 3, updates: 2, residual: 0.5, epoch: 0 });
    expect(s.series.length).toBe(3);
    expect(s.series[1]).toBeNull();
    expect(s.residualPoints().length).toBe(2);
  });

  it("ignores a leading gap", () => {
    const s = new DashboardSession("http://h:1", "p1");
    s.apply({ type: "gap" });
    expect(s.series.length).toBe(0);
  });

  it("projects status events", () => {
    const s = new DashboardSession("http://h:1", "p1");
    s.apply({ type: "status", status: "paused", epoch: 2, rho: 0.75 });
    expect(s.status).toBe("paused");
    expect(s.epoch).toBe(2);
    expect(s.rho).toBe(0.75);
  });

  it("computes contributions sorted by update count", () => {
    const s = new DashboardSession("http://h:1", "p1");
    s.applyAnalytics(analytics());
    const contrib = s.contributions();
    expect(contrib[0].wid).toBe("w-a");
    expect(contrib[0].fraction).toBeCloseTo(2 / 3, 12);
    expect(contrib.reduce((acc, c) => acc + c.fraction, 0)).toBeCloseTo(1, 12);
  });

  it("aggregates the platform breakdown by updates", () => {
    const s = new DashboardSession("http://h:1", "p1");
    s.applyAnalytics(
      analytics({
        updates_by_worker: { "w-a": 20, "w-b": 10, "w-c": 30 },
        workers: [
          { wid: "w-a", platform: "python", registered_at: 1, updates: 20 },
          { wid: "w-b", platform: "browser", registered_at: 2, updates: 10 },
          { wid: "w-c", platform: "python", registered_at: 3, updates: 30 },
        ],
        updates_total: 60,
      }),
    );
    const pie = s.platformBreakdown();
    expect(pie).toEqual([
      { platform: "python", updates: 50 },
      { platform: "browser", updates: 10 },
    ]);
  });

  it("seeds the series from the REST history rows", () => {
    const s = new DashboardSession("http://h:1", "p1");
    s.seedSeries([
      { t: 1, updates: 1, residual: 0.9 },
      { t: 2, updates: 5, residual: 0.3 },
    ]);
    expect(s.residualPoints().map((p) => p.residual)).toEqual([0.9, 0.3]);
  });

  it("caps the stored series", () => {
    const s = new DashboardSession("http://h:1", "p1");
    for (let i = 0; i < 4500; i++) {
      s.apply({ type: "residual", t: i, updates: i, residual: 1, epoch: 0 });
    }
    expect(s.series.length).toBeLessThanOrEqual(4000);
    const pts = s.residualPoints();
    expect(pts[pts.length - 1].t).toBe(4499);
  });
});
