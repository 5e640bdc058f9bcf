/** Single-page dashboard shell: hash routing, view rendering and wiring.
 *
 * Routes: #/ (instance list), #/p/{pid} (operate one instance),
 * #/attach/{pid} (worker attach page, the QR target).  Charts render only
 * data received from the store; errors surface as dismissable alerts and
 * writes are never retried behind the operator's back.
 */

import { ApiError, StoreApi } from "./api";
import {
  drawContributionBars,
  drawPlatformPie,
  drawResidualChart,
  drawStemPlot,
  type Ctx2D,
} from "./charts";
import { LiveFeed } from "./events";
import { attachUrl, drawQr, qrMatrix } from "./qr";
import { DashboardSession } from "./session";
import type { SystemDoc } from "./types";
import { BrowserWorker, type WorkerStats } from "./worker";

export type Route =
  | { view: "home" }
  | { view: "instance"; pid: string }
  | { view: "attach"; pid: string };

export function parseRoute(hash: string): Route {
  let m = /^#\/p\/([0-9a-f]+)$/.exec(hash);
  if (m) return { view: "instance", pid: m[1] };
  m = /^#\/attach\/([0-9a-f]+)$/.exec(hash);
  if (m) return { view: "attach", pid: m[1] };
  return { view: "home" };
}

/** Tiny built-in instance: nonnegative scalar fit of y = 3, solution x = 3. */
export function demoSystemDoc(): SystemDoc {
  return {
    K: 2,
    G: [0, -1, 1, 0],
    f: [0, 0],
    maps: [{ kind: "ABS" }, { kind: "CONST", v: -3 }],
    x_block: [1],
    w_block: [2],
    provenance: {
      kind: "nnls",
      A: { rows: 1, cols: 1, data: [1] },
      y: [3],
      rho_obj: 1,
      name: "demo-toy",
    },
  };
}

export interface WorkerHandle {
  stop(): void;
}

export interface AppDeps {
  fetchFn?: typeof fetch;
  eventSourceImpl?: (new (url: string) => EventSource) | null;
  /** Spawn a background worker; defaults to a Web Worker when available. */
  spawnWorker?: (
    endpoint: string,
    pid: string,
    rho: number | null,
    batch: number,
    onStats: (s: WorkerStats) => void,
  ) => WorkerHandle;
  defaultEndpoint?: string;
}

function el<T extends HTMLElement>(root: ParentNode, sel: string): T {
  const node = root.querySelector(sel);
  if (!node) throw new Error(`missing element: ${sel}`);
  return node as T;
}

function fmtResidual(r: number | null | undefined): string {
  return r === null || r === undefined ? "n/a" : r.toExponential(2);
}

export class App {
  private root: HTMLElement;
  private deps: Required<Pick<AppDeps, "defaultEndpoint">> & AppDeps;
  private feed: LiveFeed | null = null;
  private session: DashboardSession | null = null;
  private workerHandles: WorkerHandle[] = [];
  private readoutTimer: ReturnType<typeof setInterval> | null = null;
  private inPageWorkers: BrowserWorker[] = [];

  constructor(root: HTMLElement, deps: AppDeps = {}) {
    this.root = root;
    const origin =
      typeof location !== "undefined" && location.protocol.startsWith("http")
        ? location.origin
        : "http://127.0.0.1:8700";
    this.deps = { defaultEndpoint: origin, ...deps };
  }

  get endpoint(): string {
    try {
      return localStorage.getItem("swarmsolve.endpoint") ?? this.deps.defaultEndpoint;
    } catch {
      return this.deps.defaultEndpoint;
    }
  }

  set endpoint(value: string) {
    try {
      localStorage.setItem("swarmsolve.endpoint", value.replace(/\/+$/, ""));
    } catch {
      // Storage can be unavailable; the default endpoint still applies.
    }
  }

  api(): StoreApi {
    return new StoreApi(this.endpoint, this.deps.fetchFn);
  }

  start(): void {
    window.addEventListener("hashchange", () => this.render());
    this.render();
  }

  notify(message: string, kind: "error" | "info" = "error"): void {
    const box = this.root.querySelector("#alerts");
    if (!box) return;
    const div = document.createElement("div");
    div.className = `alert ${kind}`;
    div.textContent = message;
    const dismiss = document.createElement("button");
    dismiss.textContent = "x";
    dismiss.addEventListener("click", () => div.remove());
    div.appendChild(dismiss);
    box.appendChild(div);
    setTimeout(() => div.remove(), 8000);
  }

  private teardown(): void {
    this.feed?.stop();
    this.feed = null;
    for (const h of this.workerHandles) h.stop();
    this.workerHandles = [];
    this.inPageWorkers = [];
    if (this.readoutTimer !== null) {
      clearInterval(this.readoutTimer);
      this.readoutTimer = null;
    }
    this.session = null;
  }

  render(): void {
    this.teardown();
    const route = parseRoute(typeof location !== "undefined" ? location.hash : "");
    if (route.view === "home") {
      void this.renderHome();
    } else if (route.view === "instance") {
      void this.renderInstance(route.pid);
    } else {
      void this.renderAttach(route.pid);
    }
  }

  // -- home ----------------------------------------------------------------

  private async renderHome(): Promise<void> {
    this.root.innerHTML = `
      <header><h1>swarmsolve</h1></header>
      <div id="alerts"></div>
      <section class="panel">
        <label>store endpoint
          <input id="endpoint" type="text" value="${this.endpoint}" />
        </label>
        <button id="refresh">refresh</button>
      </section>
      <section class="panel">
        <h2>instances</h2>
        <table id="problems">
          <thead><tr><th>pid</th><th>name</th><th>kind</th><th>status</th>
          <th>updates</th><th></th></tr></thead>
          <tbody></tbody>
        </table>
      </section>
      <section class="panel">
        <h2>create</h2>
        <label>system file <input id="sysfile" type="file" accept=".json" /></label>
        <label>name <input id="newname" type="text" placeholder="optional" /></label>
        <label>damping <input id="newrho" type="number" min="0.01" max="1"
          step="0.05" value="0.5" /></label>
        <button id="create">create from file</button>
        <button id="demo">create demo instance</button>
      </section>`;

    const endpointInput = el<HTMLInputElement>(this.root, "#endpoint");
    endpointInput.addEventListener("change", () => {
      this.endpoint = endpointInput.value;
      this.render();
    });
    el<HTMLButtonElement>(this.root, "#refresh").addEventListener("click", () =>
      this.render(),
    );

    el<HTMLButtonElement>(this.root, "#demo").addEventListener("click", () => {
      void this.createInstance(demoSystemDoc(), "demo-toy");
    });

    el<HTMLButtonElement>(this.root, "#create").addEventListener("click", () => {
      const input = el<HTMLInputElement>(this.root, "#sysfile");
      const file = input.files?.[0];
      if (!file) {
        this.notify("choose a system JSON file first");
        return;
      }
      file
        .text()
        .then((text) => {
          const doc = JSON.parse(text);
          const system: SystemDoc = doc.system ?? doc;
          const name =
            el<HTMLInputElement>(this.root, "#newname").value || file.name;
          return this.createInstance(system, name);
        })
        .catch((err) => this.notify(`create failed: ${err}`));
    });

    try {
      const { problems } = await this.api().listProblems();
      const tbody = el<HTMLTableSectionElement>(this.root, "#problems tbody");
      tbody.innerHTML = "";
      for (const p of problems) {
        const tr = document.createElement("tr");
        const name = (p.meta as { name?: string }).name ?? "";
        const kind = (p.meta as { kind?: string }).kind ?? "";
        tr.innerHTML = `<td><a href="#/p/${p.pid}">${p.pid}</a></td>
          <td>${name}</td><td>${kind}</td><td>${p.status}</td>
          <td>${p.updates_total}</td>
          <td><a href="#/attach/${p.pid}">attach</a></td>`;
        tbody.appendChild(tr);
      }
    } catch (err) {
      this.notify(`cannot reach store: ${err}`);
    }
  }

  private async createInstance(system: SystemDoc, name: string): Promise<void> {
    try {
      const rho = parseFloat(
        el<HTMLInputElement>(this.root, "#newrho").value || "0.5",
      );
      const { pid } = await this.api().createProblem(system, {
        meta: { name },
        rho,
      });
      location.hash = `#/p/${pid}`;
    } catch (err) {
      this.notify(`create failed: ${err}`);
    }
  }

  // -- instance view ---------------------------------------------------------

  private async renderInstance(pid: string): Promise<void> {
    this.root.innerHTML = `
      <header><h1><a href="#/">swarmsolve</a> / ${pid}</h1>
        <span id="status" class="badge"></span></header>
      <div id="alerts"></div>
      <section class="panel" id="controls">
        <button id="pause">pause</button>
        <button id="resume">resume</button>
        <button id="reset">reset</button>
        <label>damping <input id="rho" type="number" min="0.01" max="1"
          step="0.05" /></label>
        <button id="setrho">set</button>
        <span id="metaline"></span>
      </section>
      <section class="panel">
        <h2>convergence <span id="residual-now"></span></h2>
        <canvas id="residual" width="640" height="200"></canvas>
      </section>
      <section class="panel">
        <h2>solution estimate</h2>
        <canvas id="stems" width="640" height="160"></canvas>
      </section>
      <div class="row">
        <section class="panel half">
          <h2>platforms</h2>
          <canvas id="pie" width="300" height="130"></canvas>
        </section>
        <section class="panel half">
          <h2>worker contributions</h2>
          <canvas id="bars" width="300" height="130"></canvas>
        </section>
      </div>
      <section class="panel">
        <h2>attach workers</h2>
        <code id="attach-url"></code>
        <canvas id="qr"></canvas>
        <div>
          <button id="bw-start">start browser worker</button>
          <button id="bw-stop">stop</button>
          <span id="bw-stats"></span>
        </div>
      </section>
      <section class="panel">
        <h2>push observation</h2>
        <textarea id="obs" rows="2" placeholder='[1.0, 2.0, ...]'></textarea>
        <button id="push-obs">push</button>
      </section>`;

    const api = this.api();
    const session = new DashboardSession(this.endpoint, pid);
    this.session = session;

    const statusEl = el<HTMLElement>(this.root, "#status");
    const residualNow = el<HTMLElement>(this.root, "#residual-now");
    const redraw = () => {
      statusEl.textContent = `${session.status} epoch ${session.epoch}`;
      const pts = session.residualPoints();
      residualNow.textContent = fmtResidual(
        pts.length ? pts[pts.length - 1].residual : null,
      );
      this.paint("#residual", (ctx, w, h) =>
        drawResidualChart(ctx, w, h, session.series),
      );
      this.paint("#pie", (ctx, w, h) =>
        drawPlatformPie(ctx, w, h, session.platformBreakdown()),
      );
      this.paint("#bars", (ctx, w, h) =>
        drawContributionBars(ctx, w, h, session.contributions()),
      );
      if (session.lastReadout) {
        this.paint("#stems", (ctx, w, h) =>
          drawStemPlot(ctx, w, h, session.lastReadout!.x_hat),
        );
      }
    };

    try {
      const meta = await api.meta(pid);
      session.status = meta.status;
      session.epoch = meta.epoch;
      session.rho = meta.rho;
      el<HTMLInputElement>(this.root, "#rho").value = String(meta.rho);
      const info = meta.meta as { name?: string; kind?: string; m?: number; n?: number };
      el<HTMLElement>(this.root, "#metaline").textContent =
        `${info.name ?? ""} ${info.kind ?? ""} ${info.m ?? "?"}x${info.n ?? "?"} K=${meta.K}`;
      const seed = await api.residualSeries(pid);
      session.seedSeries(seed.series ?? []);
      session.applyAnalytics(await api.analytics(pid));
      session.applyReadout(await api.readout(pid));
    } catch (err) {
      this.notify(`load failed: ${err}`);
    }

    const url = attachUrl(this.endpoint, pid);
    el<HTMLElement>(this.root, "#attach-url").textContent = url;
    this.paintQr("#qr", url);

    const control = (action: "pause" | "resume" | "reset") => async () => {
      try {
        await api.control(pid, action);
      } catch (err) {
        this.notify(`${action} failed: ${err}`);
      }
    };
    el<HTMLButtonElement>(this.root, "#pause").addEventListener(
      "click", control("pause"));
    el<HTMLButtonElement>(this.root, "#resume").addEventListener(
      "click", control("resume"));
    el<HTMLButtonElement>(this.root, "#reset").addEventListener(
      "click", control("reset"));
    el<HTMLButtonElement>(this.root, "#setrho").addEventListener("click", () => {
      const value = parseFloat(el<HTMLInputElement>(this.root, "#rho").value);
      api.control(pid, "set_rho", value).catch((err) =>
        this.notify(`set_rho failed: ${err}`),
      );
    });

    el<HTMLButtonElement>(this.root, "#push-obs").addEventListener("click", () => {
      let y: number[];
      try {
        const doc = JSON.parse(el<HTMLTextAreaElement>(this.root, "#obs").value);
        y = Array.isArray(doc) ? doc : doc.y;
        if (!Array.isArray(y) || y.some((v) => typeof v !== "number")) {
          throw new Error("expected a JSON array of numbers");
        }
      } catch (err) {
        this.notify(`bad observation: ${err}`);
        return;
      }
      api
        .observe(pid, y)
        .then(({ epoch }) => this.notify(`observation applied, epoch ${epoch}`, "info"))
        .catch((err) => this.notify(`push failed: ${err}`));
    });

    const bwStats = el<HTMLElement>(this.root, "#bw-stats");
    el<HTMLButtonElement>(this.root, "#bw-start").addEventListener("click", () => {
      const handle = this.spawnWorker(pid, session.rho, 8, (s) => {
        bwStats.textContent = `${s.state}, ${s.updates} updates`;
      });
      this.workerHandles.push(handle);
    });
    el<HTMLButtonElement>(this.root, "#bw-stop").addEventListener("click", () => {
      for (const h of this.workerHandles) h.stop();
      this.workerHandles = [];
    });

    this.feed = new LiveFeed(
      api,
      pid,
      (ev) => {
        session.apply(ev);
        redraw();
      },
      { eventSourceImpl: this.deps.eventSourceImpl },
    );
    this.feed.start();

    this.readoutTimer = setInterval(() => {
      api
        .readout(pid)
        .then((doc) => {
          session.applyReadout(doc);
          redraw();
        })
        .catch(() => {
          // Transient snapshot failures surface through the feed instead.
        });
      api
        .analytics(pid)
        .then((doc) => {
          session.applyAnalytics(doc);
          redraw();
        })
        .catch(() => {});
    }, 2000);

    redraw();
  }

  // -- attach view -----------------------------------------------------------

  private async renderAttach(pid: string): Promise<void> {
    this.root.innerHTML = `
      <header><h1><a href="#/">swarmsolve</a> / attach</h1></header>
      <div id="alerts"></div>
      <section class="panel center">
        <h2 id="attach-title">attach a worker</h2>
        <canvas id="qr"></canvas>
        <p><code id="attach-url"></code></p>
        <p>
          <button id="bw-start">work in this browser</button>
          <button id="bw-stop">stop</button>
          <span id="bw-stats"></span>
        </p>
        <p><a id="dash-link" href="#/p/${pid}">open dashboard</a></p>
      </section>`;

    const url = attachUrl(this.endpoint, pid);
    el<HTMLElement>(this.root, "#attach-url").textContent = url;
    this.paintQr("#qr", url);

    try {
      const meta = await this.api().meta(pid);
      const info = meta.meta as { name?: string; kind?: string };
      el<HTMLElement>(this.root, "#attach-title").textContent =
        `attach a worker: ${info.name ?? pid} (${info.kind ?? "?"})`;
    } catch (err) {
      this.notify(`load failed: ${err}`);
    }

    const bwStats = el<HTMLElement>(this.root, "#bw-stats");
    el<HTMLButtonElement>(this.root, "#bw-start").addEventListener("click", () => {
      const handle = this.spawnWorker(pid, null, 8, (s) => {
        bwStats.textContent = `${s.state}, ${s.updates} updates`;
      });
      this.workerHandles.push(handle);
    });
    el<HTMLButtonElement>(this.root, "#bw-stop").addEventListener("click", () => {
      for (const h of this.workerHandles) h.stop();
      this.workerHandles = [];
    });
  }

  // -- shared helpers --------------------------------------------------------

  spawnWorker(
    pid: string,
    rho: number | null,
    batch: number,
    onStats: (s: WorkerStats) => void,
  ): WorkerHandle {
    if (this.deps.spawnWorker) {
      return this.deps.spawnWorker(this.endpoint, pid, rho, batch, onStats);
    }
    if (typeof Worker !== "undefined") {
      const w = new Worker("./worker.js");
      w.onmessage = (ev) => {
        const msg = ev.data;
        if (msg.type === "stats") onStats(msg as WorkerStats);
        if (msg.type === "done" || msg.type === "error") w.terminate();
        if (msg.type === "error") this.notify(`worker: ${msg.message}`);
      };
      w.postMessage({ cmd: "start", endpoint: this.endpoint, pid, rho, batch });
      return { stop: () => w.postMessage({ cmd: "stop" }) };
    }
    // No Worker support: run the loop on the page's event loop instead.
    let stopped = false;
    const bw = new BrowserWorker(this.api(), pid, { rho, batch });
    this.inPageWorkers.push(bw);
    void bw
      .run({ shouldStop: () => stopped, onStats })
      .catch((err) => this.notify(`worker: ${err}`));
    return { stop: () => (stopped = true) };
  }

  private paint(
    sel: string,
    draw: (ctx: Ctx2D, w: number, h: number) => void,
  ): void {
    const canvas = this.root.querySelector(sel) as HTMLCanvasElement | null;
    if (!canvas) return;
    const ctx = canvas.getContext?.("2d");
    if (!ctx) return;
    draw(ctx as unknown as Ctx2D, canvas.width, canvas.height);
  }

  private paintQr(sel: string, url: string): void {
    const canvas = this.root.querySelector(sel) as HTMLCanvasElement | null;
    if (!canvas) return;
    try {
      const matrix = qrMatrix(url);
      const side = (matrix.length + 8) * 4;
      canvas.width = side;
      canvas.height = side;
      const ctx = canvas.getContext?.("2d");
      if (ctx) drawQr(ctx as unknown as Ctx2D, matrix, 4, 4);
    } catch (err) {
      this.notify(`qr failed: ${err}`);
    }
  }
}

export function mount(root: HTMLElement, deps: AppDeps = {}): App {
  const app = new App(root, deps);
  app.start();
  return app;
}

declare global {
  interface Window {
    __swarmsolveTest?: boolean;
  }
}

if (typeof document !== "undefined" && !window.__swarmsolveTest) {
  const root = document.getElementById("app");
  if (root) mount(root);
}
