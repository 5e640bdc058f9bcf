"""In-memory problem store with write-ahead persistence.

The store owns every live problem instance: the compiled system, the shared
coordinate vector ``c``, worker registrations and update counters, and a
residual time series filled in by a monitor thread.  Clients only ever read
snapshots and write single coordinates; writes are last-write-wins and
atomic per slot, so no client-visible coordination exists anywhere.

``d`` is never stored: the monitor and the readout reconstruct it as
``G c + f`` on demand.

Persistence (optional, enabled by passing ``data_dir``) uses one directory
per instance: ``system.json`` (rewritten on observation updates),
``wal.jsonl`` (one record per accepted mutation) and ``snapshot.json``
(written by compaction, after which the WAL is truncated).
"""

from __future__ import annotations

import json
import os
import queue
import threading
import time
import uuid
from pathlib import Path
from typing import Any

import numpy as np

from .compiler import readout as compute_readout
from .compiler import residual as compute_residual
from .compiler import update_observation
from .core import NonFiniteError, ReducedSystem

__all__ = [
    "StoreError",
    "NotFoundError",
    "InstancePaused",
    "UnknownWorker",
    "BadRequest",
    "ProblemStore",
]

_COMPACT_EVERY = 5000
_SERIES_CAP = 100_000


class StoreError(Exception):
    """Base class; ``status`` doubles as the HTTP status code."""

    status = 400
    code = "error"


class NotFoundError(StoreError):
    status = 404
    code = "not_found"


class InstancePaused(StoreError):
    status = 409
    code = "paused"


class UnknownWorker(StoreError):
    status = 403
    code = "unknown_worker"


class BadRequest(StoreError):
    status = 400
    code = "bad_request"


class _Instance:
    """Everything the store tracks for one problem instance."""

    def __init__(self, pid: str, system: ReducedSystem, meta: dict, rho: float):
        self.pid = pid
        self.system = system
        self.meta = dict(meta)
        self.rho = float(rho)
        self.lock = threading.RLock()
        self.c = np.zeros(system.K)
        self.epoch = 0
        self.status = "running"
        self.created_at = time.time()
        self.updates_total = 0
        self.workers: dict[str, dict[str, Any]] = {}
        self.subscribers: list[queue.Queue] = []
        self.last_residual: float | None = None
        self.series: list[tuple[float, int, float]] = []
        # Persistence bookkeeping (unused when the store is memory-only).
        self.dir: Path | None = None
        self.wal_fh = None
        self.wal_seq = 0
        self.wal_lines = 0


def _atomic_write_json(path: Path, doc: dict) -> None:
    tmp = path.with_suffix(".tmp")
    tmp.write_text(json.dumps(doc))
    os.replace(tmp, path)


class ProblemStore:
    """Registry of problem instances plus the residual monitor.

    Parameters
    ----------
    data_dir : str or Path, optional
        Enable persistence under this directory.  Existing instances found
        there are recovered (snapshot plus WAL replay) at construction.
    """

    def __init__(self, data_dir=None):
        self._lock = threading.RLock()
        self._instances: dict[str, _Instance] = {}
        self._requests: dict[str, str] = {}
        self._data_dir = Path(data_dir) if data_dir else None
        self._monitor_thread: threading.Thread | None = None
        self._monitor_stop = threading.Event()
        self._started = time.time()
        if self._data_dir is not None:
            self._data_dir.mkdir(parents=True, exist_ok=True)
            self._recover()

    # -- lifecycle ---------------------------------------------------------

    def create_problem(
        self,
        system: ReducedSystem,
        meta: dict | None = None,
        request_id: str | None = None,
        rho: float = 0.5,
    ) -> str:
        """Register a compiled system and return its instance id.

        Passing the same ``request_id`` again returns the existing id
        instead of creating a duplicate.
        """
        if not isinstance(system, ReducedSystem):
            raise BadRequest("system must be a ReducedSystem")
        if not (0.0 < rho <= 1.0):
            raise BadRequest("rho must lie in (0, 1]")
        with self._lock:
            if request_id:
                known = self._requests.get(request_id)
                if known is not None and known in self._instances:
                    return known
            pid = uuid.uuid4().hex[:12]
            base_meta = {
                "name": system.provenance.name,
                "kind": system.provenance.kind.value,
                "m": system.provenance.m,
                "n": system.provenance.n,
                "K": system.K,
            }
            if meta:
                base_meta.update(meta)
            inst = _Instance(pid, system, base_meta, rho)
            self._instances[pid] = inst
            if request_id:
                self._requests[request_id] = pid
            if self._data_dir is not None:
                self._init_persistence(inst)
        return pid

    def list_problems(self) -> list[dict]:
        with self._lock:
            instances = list(self._instances.values())
        out = []
        for inst in instances:
            with inst.lock:
                out.append(
                    {
                        "pid": inst.pid,
                        "meta": dict(inst.meta),
                        "status": inst.status,
                        "epoch": inst.epoch,
                        "updates_total": inst.updates_total,
                        "created_at": inst.created_at,
                    }
                )
        return out

    def get_meta(self, pid: str) -> dict:
        inst = self._get(pid)
        with inst.lock:
            return {
                "pid": inst.pid,
                "meta": dict(inst.meta),
                "status": inst.status,
                "epoch": inst.epoch,
                "rho": inst.rho,
                "K": inst.system.K,
                "created_at": inst.created_at,
            }

    def control(self, pid: str, action: str, value=None) -> dict:
        """Apply a control action: pause, resume, reset, delete or set_rho."""
        inst = self._get(pid)
        if action == "delete":
            with self._lock:
                self._instances.pop(pid, None)
            with inst.lock:
                self._close_wal(inst)
                if inst.dir is not None:
                    for name in ("system.json", "wal.jsonl", "snapshot.json"):
                        try:
                            (inst.dir / name).unlink(missing_ok=True)
                        except OSError:
                            pass
                    try:
                        inst.dir.rmdir()
                    except OSError:
                        pass
                self._publish(inst, "status", {"status": "deleted"})
                for q in inst.subscribers:
                    q.put(None)
                inst.subscribers.clear()
            return {"ok": True, "status": "deleted"}

        with inst.lock:
            if action == "pause":
                inst.status = "paused"
                self._wal(inst, {"op": "control", "action": "pause"})
            elif action == "resume":
                inst.status = "running"
                self._wal(inst, {"op": "control", "action": "resume"})
            elif action == "reset":
                inst.c = np.zeros(inst.system.K)
                inst.epoch += 1
                self._wal(inst, {"op": "reset", "epoch": inst.epoch})
            elif action == "set_rho":
                try:
                    rho = float(value)
                except (TypeError, ValueError):
                    raise BadRequest("set_rho requires a numeric value")
                if not (0.0 < rho <= 1.0):
                    raise BadRequest("rho must lie in (0, 1]")
                inst.rho = rho
                self._wal(inst, {"op": "rho", "value": rho})
            else:
                raise BadRequest(f"unknown control action {action!r}")
            state = {"status": inst.status, "epoch": inst.epoch, "rho": inst.rho}
        self._publish(inst, "status", state)
        return {"ok": True, **state}

    # -- worker-facing operations -------------------------------------------

    def register_worker(self, pid: str, platform: str = "") -> str:
        inst = self._get(pid)
        wid = "w-" + uuid.uuid4().hex[:10]
        with inst.lock:
            inst.workers[wid] = {
                "platform": str(platform)[:120],
                "registered_at": time.time(),
                "updates": 0,
            }
            self._wal(
                inst,
                {"op": "worker", "wid": wid, "platform": inst.workers[wid]["platform"]},
            )
        self._publish(inst, "analytics", self._analytics_doc(inst))
        return wid

    def read_c(self, pid: str) -> tuple[np.ndarray, int]:
        """Snapshot of the shared vector and the current epoch."""
        inst = self._get(pid)
        with inst.lock:
            return inst.c.copy(), inst.epoch

    def read_var(self, pid: str, j: int) -> dict:
        """Coordinate descriptor: map doc, offset entry, coupling row, epoch.

        ``j`` is 0-based here; the HTTP layer converts from the 1-based wire
        convention.
        """
        inst = self._get(pid)
        with inst.lock:
            system = inst.system
            if not (0 <= j < system.K):
                raise NotFoundError(f"coordinate {j + 1} out of range 1..{system.K}")
            return {
                "m": system.maps[j].to_doc(),
                "f": float(system.f[j]),
                "Grow": system.G[j].tolist(),
                "epoch": inst.epoch,
            }

    def write_c(self, pid: str, j: int, value: float, wid: str) -> dict:
        """Accept one coordinate write (last-write-wins)."""
        inst = self._get(pid)
        try:
            value = float(value)
        except (TypeError, ValueError):
            raise BadRequest("value must be a number")
        if not np.isfinite(value):
            raise NonFiniteError("value must be finite")
        with inst.lock:
            if inst.status != "running":
                raise InstancePaused(f"instance is {inst.status}")
            if not (0 <= j < inst.system.K):
                raise NotFoundError(
                    f"coordinate {j + 1} out of range 1..{inst.system.K}"
                )
            if wid not in inst.workers:
                raise UnknownWorker(f"worker {wid!r} is not registered")
            inst.c[j] = value
            inst.updates_total += 1
            inst.workers[wid]["updates"] += 1
            self._wal(inst, {"op": "w", "j": j, "v": value, "wid": wid})
            if inst.wal_fh is not None and inst.wal_lines >= _COMPACT_EVERY:
                self._compact(inst)
            return {"ok": True, "epoch": inst.epoch}

    # -- state inspection ----------------------------------------------------

    def readout(self, pid: str) -> dict:
        """Current solution estimate from (c, G c + f)."""
        inst = self._get(pid)
        with inst.lock:
            c = inst.c.copy()
            system = inst.system
            epoch = inst.epoch
        d = system.G @ c + system.f
        ro = compute_readout(system, c, d)
        res = compute_residual(system, c, d)
        return {
            "x_hat": ro.x_hat.tolist(),
            "w_hat": ro.w_hat.tolist(),
            "residual": res,
            "epoch": epoch,
        }

    def analytics(self, pid: str) -> dict:
        inst = self._get(pid)
        return self._analytics_doc(inst)

    def residual_latest(self, pid: str) -> dict:
        inst = self._get(pid)
        with inst.lock:
            if inst.series:
                t, upd, r = inst.series[-1]
                return {"t": t, "updates": upd, "residual": r}
            return {"t": None, "updates": inst.updates_total, "residual": None}

    def residual_series(self, pid: str) -> list[tuple[float, int, float]]:
        inst = self._get(pid)
        with inst.lock:
            return list(inst.series)

    def update_observation_vector(self, pid: str, y_new) -> int:
        """Swap in a new observation; bumps the epoch, preserves c."""
        inst = self._get(pid)
        y_new = np.asarray(y_new, dtype=np.float64).reshape(-1)
        with inst.lock:
            inst.system = update_observation(inst.system, y_new)
            inst.epoch += 1
            if inst.dir is not None:
                self._write_system_file(inst)
            self._wal(inst, {"op": "epoch", "epoch": inst.epoch})
            state = {"status": inst.status, "epoch": inst.epoch, "rho": inst.rho}
        self._publish(inst, "status", state)
        return state["epoch"]

    # -- events --------------------------------------------------------------

    def subscribe(self, pid: str) -> queue.Queue:
        """Queue of event dicts; ``None`` signals instance deletion."""
        inst = self._get(pid)
        q: queue.Queue = queue.Queue(maxsize=1000)
        with inst.lock:
            inst.subscribers.append(q)
        return q

    def unsubscribe(self, pid: str, q: queue.Queue) -> None:
        try:
            inst = self._get(pid)
        except NotFoundError:
            return
        with inst.lock:
            try:
                inst.subscribers.remove(q)
            except ValueError:
                pass

    def _publish(self, inst: _Instance, event: str, data: dict) -> None:
        msg = {"event": event, "data": data}
        with inst.lock:
            subs = list(inst.subscribers)
        for q in subs:
            try:
                q.put_nowait(msg)
            except queue.Full:
                pass

    # -- monitor -------------------------------------------------------------

    def monitor_once(self, pid: str) -> float | None:
        """Recompute the residual for one instance and publish it."""
        inst = self._get(pid)
        with inst.lock:
            c = inst.c.copy()
            system = inst.system
            updates = inst.updates_total
            epoch = inst.epoch
        d = system.G @ c + system.f
        res = compute_residual(system, c, d)
        now = time.time()
        with inst.lock:
            inst.last_residual = res
            inst.series.append((now, updates, res))
            if len(inst.series) > _SERIES_CAP:
                del inst.series[: _SERIES_CAP // 10]
        self._publish(
            inst,
            "residual",
            {"t": now, "updates": updates, "residual": res, "epoch": epoch},
        )
        return res

    def start_monitor(self, period: float = 0.25) -> None:
        """Start the background thread that samples every instance."""
        if self._monitor_thread is not None:
            return
        self._monitor_stop.clear()

        def loop():
            while not self._monitor_stop.wait(period):
                with self._lock:
                    pids = list(self._instances)
                for pid in pids:
                    try:
                        self.monitor_once(pid)
                        inst = self._get(pid)
                        self._publish(inst, "analytics", self._analytics_doc(inst))
                    except NotFoundError:
                        continue

        self._monitor_thread = threading.Thread(
            target=loop, name="swarmsolve-monitor", daemon=True
        )
        self._monitor_thread.start()

    def stop_monitor(self) -> None:
        if self._monitor_thread is None:
            return
        self._monitor_stop.set()
        self._monitor_thread.join(timeout=5.0)
        self._monitor_thread = None

    def close(self) -> None:
        """Stop the monitor and flush/close WAL handles."""
        self.stop_monitor()
        with self._lock:
            instances = list(self._instances.values())
        for inst in instances:
            with inst.lock:
                self._close_wal(inst)

    # -- internals -------------------------------------------------------------

    def _get(self, pid: str) -> _Instance:
        with self._lock:
            inst = self._instances.get(pid)
        if inst is None:
            raise NotFoundError(f"no instance {pid!r}")
        return inst

    def _analytics_doc(self, inst: _Instance) -> dict:
        with inst.lock:
            by_worker = {w: info["updates"] for w, info in inst.workers.items()}
            return {
                "updates_total": inst.updates_total,
                "updates_by_worker": by_worker,
                "workers": [
                    {"wid": w, **info} for w, info in sorted(inst.workers.items())
                ],
                "residual": inst.last_residual,
                "epoch": inst.epoch,
                "status": inst.status,
                "rho": inst.rho,
                "uptime_s": time.time() - inst.created_at,
            }

    # -- persistence -----------------------------------------------------------

    def _init_persistence(self, inst: _Instance) -> None:
        inst.dir = self._data_dir / inst.pid
        inst.dir.mkdir(parents=True, exist_ok=True)
        self._write_system_file(inst)
        inst.wal_fh = open(inst.dir / "wal.jsonl", "a", encoding="utf-8")

    def _write_system_file(self, inst: _Instance) -> None:
        _atomic_write_json(
            inst.dir / "system.json",
            {
                "system": inst.system.to_doc(),
                "meta": inst.meta,
                "rho": inst.rho,
                "created_at": inst.created_at,
            },
        )

    def _wal(self, inst: _Instance, record: dict) -> None:
        if inst.wal_fh is None:
            return
        inst.wal_seq += 1
        record["seq"] = inst.wal_seq
        inst.wal_fh.write(json.dumps(record) + "\n")
        inst.wal_fh.flush()
        inst.wal_lines += 1

    def _compact(self, inst: _Instance) -> None:
        """Write a snapshot and truncate the WAL (instance lock held)."""
        _atomic_write_json(
            inst.dir / "snapshot.json",
            {
                "c": inst.c.tolist(),
                "epoch": inst.epoch,
                "status": inst.status,
                "rho": inst.rho,
                "updates_total": inst.updates_total,
                "workers": inst.workers,
                "wal_seq": inst.wal_seq,
            },
        )
        inst.wal_fh.close()
        inst.wal_fh = open(inst.dir / "wal.jsonl", "w", encoding="utf-8")
        inst.wal_lines = 0

    def _close_wal(self, inst: _Instance) -> None:
        if inst.wal_fh is not None:
            try:
                inst.wal_fh.close()
            except OSError:
                pass
            inst.wal_fh = None

    def _recover(self) -> None:
        for entry in sorted(self._data_dir.iterdir()):
            sysfile = entry / "system.json"
            if not entry.is_dir() or not sysfile.exists():
                continue
            try:
                doc = json.loads(sysfile.read_text())
                system = ReducedSystem.from_doc(doc["system"])
            except (ValueError, KeyError):
                continue
            inst = _Instance(entry.name, system, doc.get("meta", {}), doc.get("rho", 0.5))
            inst.created_at = doc.get("created_at", inst.created_at)
            snap_seq = 0
            snapfile = entry / "snapshot.json"
            if snapfile.exists():
                snap = json.loads(snapfile.read_text())
                c = np.asarray(snap["c"], dtype=np.float64)
                if c.shape == (system.K,):
                    inst.c = c
                inst.epoch = int(snap.get("epoch", 0))
                inst.status = snap.get("status", "running")
                inst.rho = float(snap.get("rho", inst.rho))
                inst.updates_total = int(snap.get("updates_total", 0))
                inst.workers = dict(snap.get("workers", {}))
                snap_seq = int(snap.get("wal_seq", 0))
                inst.wal_seq = snap_seq
            walfile = entry / "wal.jsonl"
            if walfile.exists():
                self._replay(inst, walfile, snap_seq)
            inst.dir = entry
            inst.wal_fh = open(walfile, "a", encoding="utf-8")
            with self._lock:
                self._instances[inst.pid] = inst

    def _replay(self, inst: _Instance, walfile: Path, after_seq: int) -> None:
        with open(walfile, encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                try:
                    rec = json.loads(line)
                except json.JSONDecodeError:
                    continue
                seq = int(rec.get("seq", 0))
                if seq <= after_seq:
                    continue
                inst.wal_seq = max(inst.wal_seq, seq)
                inst.wal_lines += 1
                op = rec.get("op")
                if op == "w":
                    j = int(rec["j"])
                    if 0 <= j < inst.system.K:
                        inst.c[j] = float(rec["v"])
                        inst.updates_total += 1
                        wid = rec.get("wid")
                        if wid in inst.workers:
                            inst.workers[wid]["updates"] += 1
                elif op == "worker":
                    inst.workers.setdefault(
                        rec["wid"],
                        {
                            "platform": rec.get("platform", ""),
                            "registered_at": inst.created_at,
                            "updates": 0,
                        },
                    )
                elif op == "control":
                    if rec.get("action") == "pause":
                        inst.status = "paused"
                    elif rec.get("action") == "resume":
                        inst.status = "running"
                elif op == "reset":
                    inst.c = np.zeros(inst.system.K)
                    inst.epoch = int(rec.get("epoch", inst.epoch + 1))
                elif op == "epoch":
                    inst.epoch = int(rec.get("epoch", inst.epoch + 1))
                elif op == "rho":
                    inst.rho = float(rec.get("value", inst.rho))
