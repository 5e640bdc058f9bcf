/** Wire document shapes for the store's REST and event-stream API. */

export type MapKind =
  | "SSR"
  | "NEG_SSR"
  | "ABS"
  | "AFFINE"
  | "CONST"
  | "IDENTITY";

export interface MapDoc {
  kind: MapKind;
  t?: number;
  a?: number;
  b?: number;
  v?: number;
  shift?: number;
}

export interface ProblemEntry {
  pid: string;
  meta: Record<string, unknown>;
  status: string;
  epoch: number;
  updates_total: number;
  created_at: number;
}

export interface MetaDoc {
  pid: string;
  meta: Record<string, unknown>;
  status: string;
  epoch: number;
  rho: number;
  K: number;
  created_at: number;
}

export interface SnapshotDoc {
  values: number[];
  epoch: number;
}

export interface VarDoc {
  m: MapDoc;
  f: number;
  Grow: number[];
  epoch: number;
}

export interface WorkerInfo {
  wid: string;
  platform: string;
  registered_at: number;
  updates: number;
}

export interface AnalyticsDoc {
  updates_total: number;
  updates_by_worker: Record<string, number>;
  workers: WorkerInfo[];
  residual: number | null;
  epoch: number;
  status: string;
  rho: number;
  uptime_s: number;
}

export interface ReadoutDoc {
  x_hat: number[];
  w_hat: number[];
  residual: number;
  epoch: number;
}

export interface ResidualSample {
  t: number | null;
  updates: number;
  residual: number | null;
}

/** Series rows always carry a concrete time and residual. */
export interface ResidualRow {
  t: number;
  updates: number;
  residual: number;
}

export interface ResidualSeriesDoc extends ResidualSample {
  series: ResidualRow[];
}

/** Problem document (the compiler's input), embedded as provenance. */
export interface ProblemDoc {
  kind: string;
  A: { rows: number; cols: number; data: number[] };
  y: number[];
  rho_obj: number;
  name: string;
}

/** System document accepted by POST /v1/problems (inside {system: ...}).
 * G is flat row-major; block indices are 1-based on the wire. */
export interface SystemDoc {
  K: number;
  G: number[];
  f: number[];
  maps: MapDoc[];
  x_block: number[];
  w_block: number[];
  provenance: ProblemDoc;
}
