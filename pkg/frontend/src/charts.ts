/** Canvas chart renderers.
 *
 * All functions draw into a plain 2D context restricted to the small
 * interface below, so tests can pass a recording stub and headless
 * environments without canvas support simply skip rendering.
 */

import type { ResidualPoint, Contribution, PlatformSlice } from "./session";

export interface Ctx2D {
  fillStyle: string | CanvasGradient | CanvasPattern;
  strokeStyle: string | CanvasGradient | CanvasPattern;
  lineWidth: number;
  font: string;
  textAlign: CanvasTextAlign;
  textBaseline: CanvasTextBaseline;
  clearRect(x: number, y: number, w: number, h: number): void;
  fillRect(x: number, y: number, w: number, h: number): void;
  strokeRect(x: number, y: number, w: number, h: number): void;
  beginPath(): void;
  moveTo(x: number, y: number): void;
  lineTo(x: number, y: number): void;
  arc(x: number, y: number, r: number, a0: number, a1: number): void;
  closePath(): void;
  stroke(): void;
  fill(): void;
  fillText(text: string, x: number, y: number): void;
}

export const PALETTE = [
  "#4e79a7",
  "#f28e2b",
  "#59a14f",
  "#e15759",
  "#b07aa1",
  "#76b7b2",
  "#edc948",
  "#9c755f",
];

const MARGIN = { left: 44, right: 8, top: 8, bottom: 18 };

function clampLog(r: number): number {
  return Math.log10(Math.max(r, 1e-16));
}

/** Residual vs wall time on a log scale; null points break the line. */
export function drawResidualChart(
  ctx: Ctx2D,
  w: number,
  h: number,
  series: Array<ResidualPoint | null>,
): void {
  ctx.clearRect(0, 0, w, h);
  const pts = series.filter((p): p is ResidualPoint => p !== null);
  ctx.strokeStyle = "#888";
  ctx.lineWidth = 1;
  ctx.strokeRect(MARGIN.left, MARGIN.top, w - MARGIN.left - MARGIN.right,
    h - MARGIN.top - MARGIN.bottom);
  if (pts.length === 0) return;

  const t0 = pts[0].t;
  const t1 = Math.max(pts[pts.length - 1].t, t0 + 1e-9);
  let lo = Infinity;
  let hi = -Infinity;
  for (const p of pts) {
    const v = clampLog(p.residual);
    lo = Math.min(lo, v);
    hi = Math.max(hi, v);
  }
  if (hi - lo < 1e-9) {
    lo -= 1;
    hi += 1;
  }
  const x = (t: number) =>
    MARGIN.left + ((t - t0) / (t1 - t0)) * (w - MARGIN.left - MARGIN.right);
  const y = (r: number) =>
    MARGIN.top +
    ((hi - clampLog(r)) / (hi - lo)) * (h - MARGIN.top - MARGIN.bottom);

  ctx.fillStyle = "#555";
  ctx.font = "10px sans-serif";
  ctx.textAlign = "left";
  ctx.textBaseline = "middle";
  ctx.fillText(`1e${hi.toFixed(1)}`, 2, MARGIN.top + 4);
  ctx.fillText(`1e${lo.toFixed(1)}`, 2, h - MARGIN.bottom - 4);

  ctx.strokeStyle = PALETTE[0];
  ctx.lineWidth = 1.5;
  let open = false;
  for (const p of series) {
    if (p === null) {
      if (open) ctx.stroke();
      open = false;
      continue;
    }
    if (!open) {
      ctx.beginPath();
      ctx.moveTo(x(p.t), y(p.residual));
      open = true;
    } else {
      ctx.lineTo(x(p.t), y(p.residual));
    }
  }
  if (open) ctx.stroke();
}

/** Stem plot of the current solution estimate. */
export function drawStemPlot(
  ctx: Ctx2D,
  w: number,
  h: number,
  values: number[],
): void {
  ctx.clearRect(0, 0, w, h);
  ctx.strokeStyle = "#888";
  ctx.lineWidth = 1;
  ctx.strokeRect(MARGIN.left, MARGIN.top, w - MARGIN.left - MARGIN.right,
    h - MARGIN.top - MARGIN.bottom);
  if (values.length === 0) return;
  let hi = Math.max(1e-12, ...values.map((v) => Math.abs(v)));
  const innerW = w - MARGIN.left - MARGIN.right;
  const innerH = h - MARGIN.top - MARGIN.bottom;
  const x = (i: number) =>
    MARGIN.left + ((i + 0.5) / values.length) * innerW;
  const y = (v: number) => MARGIN.top + ((hi - v) / (2 * hi)) * innerH;

  ctx.strokeStyle = "#bbb";
  ctx.beginPath();
  ctx.moveTo(MARGIN.left, y(0));
  ctx.lineTo(w - MARGIN.right, y(0));
  ctx.stroke();

  ctx.strokeStyle = PALETTE[2];
  ctx.fillStyle = PALETTE[2];
  ctx.lineWidth = 1;
  for (let i = 0; i < values.length; i++) {
    ctx.beginPath();
    ctx.moveTo(x(i), y(0));
    ctx.lineTo(x(i), y(values[i]));
    ctx.stroke();
    ctx.beginPath();
    ctx.arc(x(i), y(values[i]), 2, 0, 2 * Math.PI);
    ctx.fill();
  }
  ctx.fillStyle = "#555";
  ctx.font = "10px sans-serif";
  ctx.textAlign = "left";
  ctx.textBaseline = "middle";
  ctx.fillText(hi.toPrecision(3), 2, MARGIN.top + 4);
}

/** Pie of update counts grouped by worker platform. */
export function drawPlatformPie(
  ctx: Ctx2D,
  w: number,
  h: number,
  slices: PlatformSlice[],
): void {
  ctx.clearRect(0, 0, w, h);
  const total = slices.reduce((s, p) => s + p.updates, 0);
  const cx = h / 2;
  const cy = h / 2;
  const r = h / 2 - 6;
  if (total === 0) {
    ctx.strokeStyle = "#bbb";
    ctx.beginPath();
    ctx.arc(cx, cy, r, 0, 2 * Math.PI);
    ctx.stroke();
    return;
  }
  let a = -Math.PI / 2;
  slices.forEach((p, i) => {
    const span = (p.updates / total) * 2 * Math.PI;
    ctx.fillStyle = PALETTE[i % PALETTE.length];
    ctx.beginPath();
    ctx.moveTo(cx, cy);
    ctx.arc(cx, cy, r, a, a + span);
    ctx.closePath();
    ctx.fill();
    a += span;
  });
  ctx.font = "11px sans-serif";
  ctx.textAlign = "left";
  ctx.textBaseline = "middle";
  slices.forEach((p, i) => {
    const ly = 14 + i * 16;
    ctx.fillStyle = PALETTE[i % PALETTE.length];
    ctx.fillRect(h + 6, ly - 5, 10, 10);
    ctx.fillStyle = "#333";
    ctx.fillText(
      `${p.platform} (${((100 * p.updates) / total).toFixed(0)}%)`,
      h + 22,
      ly,
    );
  });
}

/** Horizontal bars of per-worker update contributions. */
export function drawContributionBars(
  ctx: Ctx2D,
  w: number,
  h: number,
  bars: Contribution[],
): void {
  ctx.clearRect(0, 0, w, h);
  if (bars.length === 0) return;
  const rowH = Math.min(22, h / bars.length);
  const labelW = 110;
  const innerW = w - labelW - 50;
  ctx.font = "11px sans-serif";
  ctx.textBaseline = "middle";
  bars.forEach((b, i) => {
    const yTop = i * rowH;
    ctx.fillStyle = "#333";
    ctx.textAlign = "left";
    ctx.fillText(b.wid, 2, yTop + rowH / 2);
    ctx.fillStyle = PALETTE[i % PALETTE.length];
    ctx.fillRect(labelW, yTop + 3, Math.max(1, b.fraction * innerW), rowH - 6);
    ctx.fillStyle = "#333";
    ctx.fillText(String(b.updates), labelW + b.fraction * innerW + 4,
      yTop + rowH / 2);
  });
}
