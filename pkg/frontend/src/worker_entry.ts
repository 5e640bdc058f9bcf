/** Web Worker entry point hosting a BrowserWorker off the UI thread. */

import { StoreApi } from "./api";
import { BrowserWorker, defaultPlatform } from "./worker";

interface StartMsg {
  cmd: "start";
  endpoint: string;
  pid: string;
  rho: number | null;
  batch: number;
}

interface StopMsg {
  cmd: "stop";
}

const scope = self as unknown as {
  onmessage: ((ev: MessageEvent) => void) | null;
  postMessage(msg: unknown): void;
};

let stopped = false;
let started = false;

scope.onmessage = (ev: MessageEvent) => {
  const msg = ev.data as StartMsg | StopMsg;
  if (msg.cmd === "stop") {
    stopped = true;
    return;
  }
  if (msg.cmd !== "start" || started) return;
  started = true;
  const api = new StoreApi(msg.endpoint);
  const worker = new BrowserWorker(api, msg.pid, {
    rho: msg.rho,
    batch: msg.batch,
    platform: defaultPlatform(),
  });
  worker
    .run({
      shouldStop: () => stopped,
      onStats: (s) => scope.postMessage({ type: "stats", ...s }),
    })
    .then((updates) => scope.postMessage({ type: "done", updates }))
    .catch((err) => scope.postMessage({ type: "error", message: String(err) }));
};
