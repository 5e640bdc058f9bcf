"""Worker client: pulls coordinates from a store and pushes updates back.

A worker is intentionally stateless apart from its id: every round it takes
a fresh snapshot of the shared vector, picks coordinates uniformly at
random, applies the coordinate map with a blend filter and writes single
values back.  Staleness (its snapshot aging while others write) is part of
the protocol, not an error; last write wins at the store.

The HTTP client keeps one persistent connection per worker with Nagle's
algorithm disabled; see the server module for why that matters.
"""

from __future__ import annotations

import http.client
import json
import math
import platform as _platform
import socket
import threading
import time
from dataclasses import dataclass, replace
from typing import Callable

import numpy as np

from .core import CoordinateMap, NonFiniteError, eval_map

__all__ = [
    "TransportError",
    "ApiError",
    "StoreClient",
    "VarSlot",
    "WorkerConfig",
    "Worker",
    "WorkerPool",
    "worker_step",
    "default_platform",
]


class TransportError(RuntimeError):
    """Connection-level failure (refused, reset, timed out)."""


class ApiError(RuntimeError):
    """Non-2xx response from the store."""

    def __init__(self, status: int, code: str, message: str):
        super().__init__(f"{status} {code}: {message}")
        self.status = status
        self.code = code


class StoreClient:
    """Minimal JSON-over-HTTP client with a persistent connection."""

    def __init__(self, endpoint: str, timeout: float = 10.0):
        from urllib.parse import urlsplit

        url = urlsplit(endpoint)
        if url.scheme not in ("http", ""):
            raise ValueError("only http endpoints are supported")
        self.host = url.hostname or "127.0.0.1"
        self.port = url.port or 80
        self.timeout = timeout
        self._conn: http.client.HTTPConnection | None = None

    def _connection(self) -> http.client.HTTPConnection:
        if self._conn is None:
            conn = http.client.HTTPConnection(
                self.host, self.port, timeout=self.timeout
            )
            conn.connect()
            conn.sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
            self._conn = conn
        return self._conn

    def close(self) -> None:
        if self._conn is not None:
            try:
                self._conn.close()
            except OSError:
                pass
            self._conn = None

    def request(self, method: str, path: str, body: dict | None = None) -> dict:
        payload = None
        headers = {}
        if body is not None:
            payload = json.dumps(body)
            headers["Content-Type"] = "application/json"
        try:
            conn = self._connection()
            conn.request(method, path, body=payload, headers=headers)
            resp = conn.getresponse()
            raw = resp.read()
        except (http.client.HTTPException, OSError) as exc:
            self.close()
            raise TransportError(str(exc)) from exc
        try:
            doc = json.loads(raw) if raw else {}
        except json.JSONDecodeError:
            doc = {}
        if resp.status >= 400:
            raise ApiError(
                resp.status,
                str(doc.get("error", "error")),
                str(doc.get("message", raw[:200])),
            )
        return doc

    def get(self, path: str) -> dict:
        return self.request("GET", path)

    def post(self, path: str, body: dict) -> dict:
        return self.request("POST", path, body)

    def put(self, path: str, body: dict) -> dict:
        return self.request("PUT", path, body)


@dataclass(frozen=True)
class VarSlot:
    """Cached per-coordinate descriptor fetched from the store.

    ``j`` is kept 0-based internally; the wire uses 1-based indices.
    """

    j: int
    cmap: CoordinateMap
    f: float
    grow: np.ndarray
    epoch: int

    @classmethod
    def from_doc(cls, j: int, doc: dict) -> "VarSlot":
        grow = np.asarray(doc["Grow"], dtype=np.float64)
        return cls(
            j=j,
            cmap=CoordinateMap.from_doc(doc["m"]),
            f=float(doc["f"]),
            grow=grow,
            epoch=int(doc.get("epoch", 0)),
        )


def worker_step(c_snapshot: np.ndarray, var: VarSlot, rho: float) -> float:
    """Compute the replacement value for one coordinate.

    Reconstructs ``d_j = Grow . c + f_j`` from the snapshot, applies the
    coordinate map and blends with the snapshot value:
    ``rho * m_j(d_j) + (1 - rho) * c_j``.

    Raises
    ------
    NonFiniteError
        If the reconstructed input or the result is not finite.
    """
    if not (0.0 < rho <= 1.0):
        raise ValueError("rho must lie in (0, 1]")
    d_j = float(var.grow @ c_snapshot) + var.f
    if not math.isfinite(d_j):
        raise NonFiniteError("reconstructed coordinate is not finite")
    target = eval_map(var.cmap, d_j)
    if rho == 1.0:
        return target
    return rho * target + (1.0 - rho) * float(c_snapshot[var.j])


def default_platform() -> str:
    return f"python/{_platform.python_version()} {_platform.system().lower()}"


@dataclass(frozen=True)
class WorkerConfig:
    """Settings for one worker.

    Parameters
    ----------
    endpoint : str
        Store base URL, e.g. ``http://127.0.0.1:8700``.
    pid : str
        Problem instance id.
    rho : float, optional
        Blend weight.  ``None`` follows the store's advertised value.
    seed : int, optional
        Coordinate sampling seed; ``None`` draws from the OS.
    platform : str
        Label reported at registration (defaults to interpreter/OS).
    latency : (float, float), optional
        Uniform artificial delay in seconds inserted between reading the
        snapshot and writing updates, to exercise staleness.
    batch : int
        Coordinate updates per snapshot (1 reproduces the pure protocol;
        larger batches amortize round trips, every update still writes
        one coordinate).
    poll_every : int
        Rounds between status/rho polls.
    """

    endpoint: str
    pid: str
    rho: float | None = None
    seed: int | None = None
    platform: str = ""
    latency: tuple[float, float] | None = None
    batch: int = 1
    poll_every: int = 50

    def __post_init__(self):
        if self.rho is not None and not (0.0 < self.rho <= 1.0):
            raise ValueError("rho must lie in (0, 1]")
        if self.batch < 1:
            raise ValueError("batch must be at least 1")
        if self.latency is not None:
            lo, hi = self.latency
            if not (0.0 <= lo <= hi):
                raise ValueError("latency range must satisfy 0 <= lo <= hi")


class Worker:
    """One worker loop bound to a single problem instance.

    Parameters
    ----------
    config : WorkerConfig
    audit : callable, optional
        Called with small dicts at protocol moments (``read`` after each
        snapshot, ``write`` after each accepted update); used by tests to
        trace interleavings.
    """

    def __init__(self, config: WorkerConfig, audit: Callable[[dict], None] | None = None):
        self.config = config
        self.client = StoreClient(config.endpoint)
        self.rng = np.random.default_rng(config.seed)
        self.audit = audit
        self.wid: str | None = None
        self.updates = 0
        self.rho = config.rho if config.rho is not None else 0.5
        self._vars: dict[int, VarSlot] = {}
        self._epoch = -1
        self._rounds = 0
        self._base = f"/v1/problems/{config.pid}"

    # -- protocol ------------------------------------------------------------

    def register(self) -> str:
        label = self.config.platform or default_platform()
        doc = self.client.post(f"{self._base}/workers", {"platform": label})
        self.wid = doc["wid"]
        self._poll_status()
        return self.wid

    def _poll_status(self) -> str:
        doc = self.client.get(f"{self._base}/meta")
        if self.config.rho is None:
            self.rho = float(doc.get("rho", self.rho))
        return doc.get("status", "running")

    def _var(self, j: int, epoch: int) -> VarSlot:
        slot = self._vars.get(j)
        if slot is None or slot.epoch != epoch:
            doc = self.client.get(f"{self._base}/var/{j + 1}")
            slot = VarSlot.from_doc(j, doc)
            self._vars[j] = slot
        return slot

    def _sleep_latency(self) -> None:
        if self.config.latency is not None:
            lo, hi = self.config.latency
            time.sleep(self.rng.uniform(lo, hi))

    def round(self) -> int:
        """One snapshot plus ``batch`` coordinate updates.

        Returns the number of accepted writes (0 when paused).
        """
        doc = self.client.get(f"{self._base}/c")
        c = np.asarray(doc["values"], dtype=np.float64)
        epoch = int(doc.get("epoch", 0))
        if epoch != self._epoch:
            self._vars.clear()
            self._epoch = epoch
        if self.audit is not None:
            self.audit({"op": "read", "wid": self.wid, "epoch": epoch, "t": time.time()})
        K = c.shape[0]
        self._sleep_latency()
        accepted = 0
        for _ in range(self.config.batch):
            j = int(self.rng.integers(K))
            var = self._var(j, epoch)
            try:
                value = worker_step(c, var, self.rho)
            except NonFiniteError:
                continue
            self.client.put(
                f"{self._base}/c/{j + 1}", {"value": value, "wid": self.wid}
            )
            c[j] = value
            accepted += 1
            self.updates += 1
            if self.audit is not None:
                self.audit(
                    {
                        "op": "write",
                        "wid": self.wid,
                        "j": j,
                        "value": value,
                        "t": time.time(),
                    }
                )
        return accepted

    def run(
        self,
        stop: threading.Event | None = None,
        max_updates: int | None = None,
    ) -> int:
        """Run until stopped, deleted or ``max_updates`` accepted writes."""
        backoff = 0.05
        while stop is None or not stop.is_set():
            if max_updates is not None and self.updates >= max_updates:
                break
            try:
                if self.wid is None:
                    self.register()
                self._rounds += 1
                if self.config.poll_every and self._rounds % self.config.poll_every == 0:
                    self._poll_status()
                self.round()
                backoff = 0.05
            except TransportError:
                if stop is not None and stop.wait(backoff):
                    break
                if stop is None:
                    time.sleep(backoff)
                backoff = min(backoff * 2.0, 2.0)
            except ApiError as exc:
                if exc.status == 404:
                    break
                if exc.status == 409:
                    # Paused: idle politely, keep polling.
                    if stop is not None and stop.wait(0.2):
                        break
                    if stop is None:
                        time.sleep(0.2)
                elif exc.status == 403:
                    self.wid = None
                else:
                    raise
        self.client.close()
        return self.updates


class WorkerPool:
    """Spawn and manage a set of worker threads against one instance."""

    def __init__(
        self,
        config: WorkerConfig,
        count: int,
        audit: Callable[[dict], None] | None = None,
    ):
        if count < 1:
            raise ValueError("count must be at least 1")
        self.stop_event = threading.Event()
        self.workers: list[Worker] = []
        for i in range(count):
            seed = None if config.seed is None else config.seed + i
            self.workers.append(Worker(replace(config, seed=seed), audit=audit))
        self.threads: list[threading.Thread] = []

    def start(self, max_updates: int | None = None) -> "WorkerPool":
        for i, w in enumerate(self.workers):
            t = threading.Thread(
                target=w.run,
                kwargs={"stop": self.stop_event, "max_updates": max_updates},
                name=f"swarmsolve-worker-{i}",
                daemon=True,
            )
            t.start()
            self.threads.append(t)
        return self

    def join(self, timeout: float | None = None) -> bool:
        """Wait for all workers; returns True when every thread finished."""
        deadline = None if timeout is None else time.time() + timeout
        for t in self.threads:
            left = None if deadline is None else max(0.0, deadline - time.time())
            t.join(left)
        return all(not t.is_alive() for t in self.threads)

    def stop(self) -> None:
        self.stop_event.set()
        self.join(timeout=10.0)

    @property
    def total_updates(self) -> int:
        return sum(w.updates for w in self.workers)
