/** Drives the real dashboard client code against a running store server.
 *
 * Usage:
 *   node scripts/smoke.cjs http://127.0.0.1:8733
 *
 * Build first with `node scripts/build_smoke.mjs` (bundles this file for
 * node).  Exercises the same code paths the browser runs: create the demo
 * instance, decode its attach QR, solve with a BrowserWorker, pause,
 * observe, reconverge and stream one server-sent event.
 */

import jsQR from "jsqr";

import { ApiError, StoreApi } from "../src/api";
import { demoSystemDoc } from "../src/main";
import { attachUrl, qrMatrix, rasterize } from "../src/qr";
import { BrowserWorker } from "../src/worker";

const endpoint = process.argv[2] ?? "http://127.0.0.1:8733";

function check(name: string, ok: boolean, detail = ""): void {
  const suffix = detail ? ` (${detail})` : "";
  console.log(`[SMOKE] ${name}: ${ok ? "ok" : "FAILED"}${suffix}`);
  if (!ok) process.exit(1);
}

function sleep(ms: number): Promise<void> {
  return new Promise((r) => setTimeout(r, ms));
}

function roundRobin(): (K: number) => number {
  let i = 0;
  return (K) => i++ % K;
}

async function firstSseEvent(url: string, ms: number): Promise<string> {
  const ctrl = new AbortController();
  const timer = setTimeout(() => ctrl.abort(), ms);
  try {
    const res = await fetch(url, { signal: ctrl.signal });
    const reader = res.body!.getReader();
    const decoder = new TextDecoder();
    let buf = "";
    for (;;) {
      const { value, done } = await reader.read();
      if (done) break;
      buf += decoder.decode(value, { stream: true });
      const m = /event: (\w+)\n/.exec(buf);
      if (m) {
        ctrl.abort();
        return m[1];
      }
    }
    return "";
  } catch (err) {
    if ((err as Error).name === "AbortError") return "";
    throw err;
  } finally {
    clearTimeout(timer);
  }
}

async function main(): Promise<void> {
  const api = new StoreApi(endpoint);

  const shell = await fetch(`${endpoint}/`);
  check(
    "ui shell served",
    shell.status === 200 &&
      (shell.headers.get("content-type") ?? "").includes("text/html"),
  );
  const bundle = await fetch(`${endpoint}/app.js`);
  check("app bundle served", bundle.status === 200);

  const { pid } = await api.createProblem(demoSystemDoc(), {
    meta: { name: "smoke-demo" },
    rho: 0.5,
  });
  check("demo instance created", /^[0-9a-f]+$/.test(pid), `pid ${pid}`);

  const url = attachUrl(endpoint, pid);
  const img = rasterize(qrMatrix(url), 4, 4);
  const decoded = jsQR(img.data, img.width, img.height);
  check("attach QR decodes to attach URL", decoded?.data === url, url);

  const worker = new BrowserWorker(api, pid, {
    rho: 0.5,
    batch: 8,
    platform: "node/smoke",
    pickIndex: roundRobin(),
  });
  await worker.register();
  await worker.run({ maxUpdates: 400 });
  await sleep(0.6 * 1000);
  const settled = await api.readout(pid);
  check(
    "browser worker converges the demo",
    settled.residual < 1e-9,
    `residual ${settled.residual.toExponential(2)}`,
  );
  const analytics = await api.analytics(pid);
  check(
    "updates counted per worker",
    analytics.updates_total === 400 &&
      analytics.updates_by_worker[worker.wid as string] === 400,
    `total ${analytics.updates_total}`,
  );

  await api.control(pid, "pause");
  let paused = false;
  try {
    await worker.round();
  } catch (err) {
    paused = err instanceof ApiError && err.status === 409;
  }
  const frozen = await api.analytics(pid);
  check(
    "pause rejects writes and freezes counters",
    paused && frozen.updates_total === 400,
  );
  await api.control(pid, "resume");

  const { epoch } = await api.observe(pid, [5]);
  await sleep(0.6 * 1000);
  const spiked = await api.readout(pid);
  check(
    "observation push spikes the residual",
    epoch === 1 && spiked.residual > 1,
    `residual ${spiked.residual.toExponential(2)}`,
  );

  await worker.run({ maxUpdates: 800 });
  await sleep(0.6 * 1000);
  const recovered = await api.readout(pid);
  check(
    "worker reconverges to the new observation",
    recovered.residual < 1e-9 && Math.abs(recovered.x_hat[0] - 5) < 1e-6,
    `x_hat ${recovered.x_hat[0].toFixed(6)}`,
  );

  const series = (await api.residualSeries(pid)).series ?? [];
  const residuals = series.map((row) => row.residual);
  const peak = Math.max(...residuals);
  const peakIdx = residuals.indexOf(peak);
  check(
    "series shows spike then decay",
    peak > 1 &&
      peakIdx > 0 &&
      peakIdx < residuals.length - 1 &&
      residuals[residuals.length - 1] < 1e-9,
    `peak ${peak.toExponential(2)} at sample ${peakIdx}/${residuals.length}`,
  );

  const eventName = await firstSseEvent(api.eventsUrl(pid), 3000);
  check("event stream emits named events", eventName.length > 0, eventName);

  await api.control(pid, "delete");
  console.log("[SMOKE] all checks passed");
}

main().catch((err) => {
  console.error(err);
  process.exit(1);
});
