"""HTTP front end for the problem store.

Stdlib-only service: a ThreadingHTTPServer with one thread per connection,
JSON request/response bodies, a server-sent-events stream for live updates
and optional static file serving for the dashboard.  Nagle's algorithm is
disabled on every connection; without that, single-coordinate round trips
pay the classic 40 ms delayed-ACK penalty and throughput collapses.

Routes (all under ``/v1``; ``{j}`` is 1-based on the wire):

========  ===================================  =========================
method    path                                 body / response
========  ===================================  =========================
POST      /v1/problems                         {system, meta?, request_id?,
                                               rho?} -> {pid}
GET       /v1/problems                         -> {problems: [...]}
GET       /v1/problems/{pid}/meta              -> meta document
POST      /v1/problems/{pid}/control           {action, value?} -> {ok,...}
GET       /v1/problems/{pid}/c                 -> {values, epoch}
GET       /v1/problems/{pid}/var/{j}           -> {m, f, Grow, epoch}
PUT       /v1/problems/{pid}/c/{j}             {value, wid} -> {ok, epoch}
POST      /v1/problems/{pid}/workers           {platform?} -> {wid}
GET       /v1/problems/{pid}/analytics         -> counters document
GET       /v1/problems/{pid}/residual          -> latest (``?series=1``
                                               adds the full series)
GET       /v1/problems/{pid}/readout           -> {x_hat, w_hat, residual,
                                               epoch}
POST      /v1/problems/{pid}/observation       {y} -> {epoch}
GET       /v1/problems/{pid}/events            server-sent events
========  ===================================  =========================
"""

from __future__ import annotations

import json
import mimetypes
import queue
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from urllib.parse import parse_qs, urlsplit

from .core import NonFiniteError, ReducedSystem
from .store import ProblemStore, StoreError

__all__ = ["StoreServer"]


class _Handler(BaseHTTPRequestHandler):
    protocol_version = "HTTP/1.1"
    disable_nagle_algorithm = True
    server_version = "swarmsolve"

    def log_message(self, fmt, *args):
        pass

    # -- plumbing ----------------------------------------------------------

    @property
    def store(self) -> ProblemStore:
        return self.server.store

    def _body(self) -> dict:
        length = int(self.headers.get("Content-Length") or 0)
        if length <= 0:
            return {}
        raw = self.rfile.read(length)
        try:
            doc = json.loads(raw)
        except json.JSONDecodeError:
            raise _HttpError(400, "bad_request", "body is not valid JSON")
        if not isinstance(doc, dict):
            raise _HttpError(400, "bad_request", "body must be a JSON object")
        return doc

    def _send_json(self, doc: dict, status: int = 200) -> None:
        payload = json.dumps(doc).encode()
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(payload)))
        self.end_headers()
        self.wfile.write(payload)

    def _dispatch(self, method: str) -> None:
        url = urlsplit(self.path)
        parts = [p for p in url.path.split("/") if p]
        try:
            if parts[:1] == ["v1"]:
                self._api(method, parts[1:], parse_qs(url.query))
            elif method == "GET":
                self._static(url.path)
            else:
                raise _HttpError(404, "not_found", "unknown path")
        except _HttpError as exc:
            self._send_json(
                {"error": exc.code, "message": exc.message}, status=exc.status
            )
        except StoreError as exc:
            self._send_json(
                {"error": exc.code, "message": str(exc)}, status=exc.status
            )
        except (NonFiniteError, ValueError) as exc:
            self._send_json({"error": "bad_request", "message": str(exc)}, 400)
        except (BrokenPipeError, ConnectionResetError):
            self.close_connection = True
        except Exception as exc:  # pragma: no cover - defensive
            self._send_json({"error": "internal", "message": str(exc)}, 500)

    def do_GET(self):
        self._dispatch("GET")

    def do_POST(self):
        self._dispatch("POST")

    def do_PUT(self):
        self._dispatch("PUT")

    # -- API routes ----------------------------------------------------------

    def _api(self, method: str, parts: list[str], query: dict) -> None:
        if parts[:1] != ["problems"]:
            raise _HttpError(404, "not_found", "unknown path")
        rest = parts[1:]
        if not rest:
            if method == "GET":
                return self._send_json({"problems": self.store.list_problems()})
            if method == "POST":
                return self._create()
            raise _HttpError(405, "method_not_allowed", method)
        pid, tail = rest[0], rest[1:]
        if tail == ["meta"] and method == "GET":
            return self._send_json(self.store.get_meta(pid))
        if tail == ["control"] and method == "POST":
            body = self._body()
            action = body.get("action")
            if not isinstance(action, str):
                raise _HttpError(400, "bad_request", "missing control action")
            return self._send_json(
                self.store.control(pid, action, value=body.get("value"))
            )
        if tail == ["c"] and method == "GET":
            values, epoch = self.store.read_c(pid)
            return self._send_json({"values": values.tolist(), "epoch": epoch})
        if len(tail) == 2 and tail[0] == "var" and method == "GET":
            return self._send_json(self.store.read_var(pid, self._index(tail[1])))
        if len(tail) == 2 and tail[0] == "c" and method == "PUT":
            body = self._body()
            if "value" not in body or "wid" not in body:
                raise _HttpError(400, "bad_request", "value and wid are required")
            return self._send_json(
                self.store.write_c(
                    pid, self._index(tail[1]), body["value"], str(body["wid"])
                )
            )
        if tail == ["workers"] and method == "POST":
            body = self._body()
            wid = self.store.register_worker(pid, str(body.get("platform", "")))
            return self._send_json({"wid": wid}, status=201)
        if tail == ["analytics"] and method == "GET":
            return self._send_json(self.store.analytics(pid))
        if tail == ["residual"] and method == "GET":
            doc = self.store.residual_latest(pid)
            if query.get("series", ["0"])[0] not in ("0", ""):
                doc["series"] = [
                    {"t": t, "updates": u, "residual": r}
                    for t, u, r in self.store.residual_series(pid)
                ]
            return self._send_json(doc)
        if tail == ["readout"] and method == "GET":
            return self._send_json(self.store.readout(pid))
        if tail == ["observation"] and method == "POST":
            body = self._body()
            if "y" not in body:
                raise _HttpError(400, "bad_request", "missing observation y")
            epoch = self.store.update_observation_vector(pid, body["y"])
            return self._send_json({"ok": True, "epoch": epoch})
        if tail == ["events"] and method == "GET":
            return self._events(pid)
        raise _HttpError(404, "not_found", "unknown path")

    @staticmethod
    def _index(text: str) -> int:
        try:
            j = int(text)
        except ValueError:
            raise _HttpError(400, "bad_request", f"bad coordinate index {text!r}")
        if j < 1:
            raise _HttpError(400, "bad_request", "coordinate indices are 1-based")
        return j - 1

    def _create(self) -> None:
        body = self._body()
        if "system" not in body:
            raise _HttpError(400, "bad_request", "missing system document")
        system = ReducedSystem.from_doc(body["system"])
        pid = self.store.create_problem(
            system,
            meta=body.get("meta") or None,
            request_id=body.get("request_id") or None,
            rho=float(body.get("rho", 0.5)),
        )
        self._send_json({"pid": pid}, status=201)

    # -- server-sent events ----------------------------------------------------

    def _events(self, pid: str) -> None:
        q = self.store.subscribe(pid)
        try:
            self.send_response(200)
            self.send_header("Content-Type", "text/event-stream")
            self.send_header("Cache-Control", "no-cache")
            self.send_header("Connection", "close")
            self.end_headers()
            while not self.server.stopping.is_set():
                try:
                    msg = q.get(timeout=0.5)
                except queue.Empty:
                    self.wfile.write(b": keepalive\n\n")
                    self.wfile.flush()
                    continue
                if msg is None:
                    break
                chunk = (
                    f"event: {msg['event']}\n"
                    f"data: {json.dumps(msg['data'])}\n\n"
                ).encode()
                self.wfile.write(chunk)
                self.wfile.flush()
        except (BrokenPipeError, ConnectionResetError, OSError):
            pass
        finally:
            self.store.unsubscribe(pid, q)
            self.close_connection = True

    # -- static dashboard --------------------------------------------------------

    def _static(self, path: str) -> None:
        ui_dir: Path | None = self.server.ui_dir
        if ui_dir is None:
            if path == "/":
                return self._send_json({"service": "swarmsolve", "api": "/v1"})
            raise _HttpError(404, "not_found", "no dashboard installed")
        name = path.lstrip("/") or "index.html"
        target = (ui_dir / name).resolve()
        if not str(target).startswith(str(ui_dir.resolve())) or not target.is_file():
            # Unknown paths fall back to the app shell so hash routes work.
            target = (ui_dir / "index.html").resolve()
            if not target.is_file():
                raise _HttpError(404, "not_found", "no dashboard installed")
        data = target.read_bytes()
        ctype = mimetypes.guess_type(str(target))[0] or "application/octet-stream"
        self.send_response(200)
        self.send_header("Content-Type", ctype)
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)


class _HttpError(Exception):
    def __init__(self, status: int, code: str, message: str):
        super().__init__(message)
        self.status = status
        self.code = code
        self.message = message


class StoreServer:
    """Owns the HTTP server thread and the store's monitor thread.

    Parameters
    ----------
    store : ProblemStore
    host, port : str, int
        ``port=0`` picks a free port (see :attr:`endpoint`).
    ui_dir : str or Path, optional
        Directory of static dashboard files served outside ``/v1``.
    monitor_period : float
        Residual sampling period in seconds.
    """

    def __init__(
        self,
        store: ProblemStore,
        host: str = "127.0.0.1",
        port: int = 0,
        ui_dir=None,
        monitor_period: float = 0.25,
    ):
        self.store = store
        self.monitor_period = monitor_period
        self.httpd = ThreadingHTTPServer((host, port), _Handler)
        self.httpd.daemon_threads = True
        self.httpd.block_on_close = False
        self.httpd.store = store
        self.httpd.ui_dir = Path(ui_dir) if ui_dir else None
        self.httpd.stopping = threading.Event()
        self._thread: threading.Thread | None = None

    @property
    def endpoint(self) -> str:
        host, port = self.httpd.server_address[:2]
        return f"http://{host}:{port}"

    def start(self) -> "StoreServer":
        self.store.start_monitor(self.monitor_period)
        self._thread = threading.Thread(
            target=self.httpd.serve_forever,
            kwargs={"poll_interval": 0.1},
            name="swarmsolve-http",
            daemon=True,
        )
        self._thread.start()
        return self

    def stop(self) -> None:
        self.httpd.stopping.set()
        self.httpd.shutdown()
        self.httpd.server_close()
        if self._thread is not None:
            self._thread.join(timeout=5.0)
            self._thread = None
        self.store.close()

    def __enter__(self) -> "StoreServer":
        return self.start()

    def __exit__(self, *exc) -> None:
        self.stop()
