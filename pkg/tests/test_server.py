"""HTTP surface: routes, status codes, wire conventions, SSE, static files."""

import http.client
import json
import socket
import threading
import time

import numpy as np
import pytest

import swarmsolve as sw
from swarmsolve.worker import ApiError, StoreClient
from tests.conftest import small_instance


@pytest.fixture
def api(live_server):
    server, store = live_server
    spec, _ = small_instance("nnls")
    system = sw.compile_problem(spec)
    client = StoreClient(server.endpoint)
    pid = client.post(
        "/v1/problems", {"system": system.to_doc(), "rho": 0.5}
    )["pid"]
    return server, store, client, pid, system, spec


class TestProblemRoutes:
    def test_create_and_list(self, api):
        server, store, client, pid, system, spec = api
        listing = client.get("/v1/problems")
        assert [p["pid"] for p in listing["problems"]] == [pid]
        meta = client.get(f"/v1/problems/{pid}/meta")
        assert meta["K"] == system.K
        assert meta["meta"]["kind"] == "nnls"

    def test_create_idempotent_via_request_id(self, api):
        server, store, client, pid, system, spec = api
        body = {"system": system.to_doc(), "request_id": "same"}
        a = client.post("/v1/problems", body)["pid"]
        b = client.post("/v1/problems", body)["pid"]
        assert a == b

    def test_create_requires_system(self, api):
        _, _, client, *_ = api
        with pytest.raises(ApiError) as err:
            client.post("/v1/problems", {"meta": {}})
        assert err.value.status == 400

    def test_unknown_pid_is_404(self, api):
        _, _, client, *_ = api
        with pytest.raises(ApiError) as err:
            client.get("/v1/problems/zzz/meta")
        assert err.value.status == 404

    def test_unknown_route_is_404(self, api):
        _, _, client, *_ = api
        with pytest.raises(ApiError) as err:
            client.get("/v1/blah")
        assert err.value.status == 404


class TestCoordinateRoutes:
    def test_one_based_indexing_on_wire(self, api):
        server, store, client, pid, system, spec = api
        wid = client.post(f"/v1/problems/{pid}/workers", {"platform": "t"})["wid"]
        client.put(f"/v1/problems/{pid}/c/1", {"value": 7.5, "wid": wid})
        c, _ = store.read_c(pid)
        assert c[0] == 7.5  # wire index 1 is internal slot 0
        doc = client.get(f"/v1/problems/{pid}/c")
        assert doc["values"][0] == 7.5
        var = client.get(f"/v1/problems/{pid}/var/{system.K}")
        assert var["m"] == system.maps[-1].to_doc()

    def test_var_out_of_range(self, api):
        _, _, client, pid, system, _ = api
        with pytest.raises(ApiError) as err:
            client.get(f"/v1/problems/{pid}/var/{system.K + 1}")
        assert err.value.status == 404
        with pytest.raises(ApiError) as err:
            client.get(f"/v1/problems/{pid}/var/0")
        assert err.value.status == 400

    def test_write_validation_over_http(self, api):
        _, _, client, pid, *_ = api
        wid = client.post(f"/v1/problems/{pid}/workers", {})["wid"]
        with pytest.raises(ApiError) as err:
            client.put(f"/v1/problems/{pid}/c/1", {"value": 1.0, "wid": "w-x"})
        assert err.value.status == 403
        with pytest.raises(ApiError) as err:
            client.put(f"/v1/problems/{pid}/c/1", {"wid": wid})
        assert err.value.status == 400

    def test_paused_write_is_409(self, api):
        _, _, client, pid, *_ = api
        wid = client.post(f"/v1/problems/{pid}/workers", {})["wid"]
        client.post(f"/v1/problems/{pid}/control", {"action": "pause"})
        with pytest.raises(ApiError) as err:
            client.put(f"/v1/problems/{pid}/c/1", {"value": 1.0, "wid": wid})
        assert err.value.status == 409
        client.post(f"/v1/problems/{pid}/control", {"action": "resume"})
        doc = client.put(f"/v1/problems/{pid}/c/1", {"value": 1.0, "wid": wid})
        assert doc["ok"] is True


class TestServiceRoutes:
    def test_analytics_and_readout(self, api):
        server, store, client, pid, system, spec = api
        wid = client.post(f"/v1/problems/{pid}/workers", {"platform": "t"})["wid"]
        client.put(f"/v1/problems/{pid}/c/2", {"value": 1.0, "wid": wid})
        an = client.get(f"/v1/problems/{pid}/analytics")
        assert an["updates_total"] == 1
        assert an["updates_by_worker"][wid] == 1
        ro = client.get(f"/v1/problems/{pid}/readout")
        assert len(ro["x_hat"]) == spec.n
        assert len(ro["w_hat"]) == spec.m
        local = store.readout(pid)
        assert np.allclose(ro["x_hat"], local["x_hat"])

    def test_observation_route(self, api):
        server, store, client, pid, system, spec = api
        y2 = (spec.y + 1.0).tolist()
        doc = client.post(f"/v1/problems/{pid}/observation", {"y": y2})
        assert doc["epoch"] == 1
        var = client.get(f"/v1/problems/{pid}/var/{spec.n + 1}")
        assert var["m"]["v"] == pytest.approx(-y2[0])

    def test_residual_series_param(self, api):
        server, store, client, pid, *_ = api
        store.monitor_once(pid)
        store.monitor_once(pid)
        latest = client.get(f"/v1/problems/{pid}/residual")
        assert "series" not in latest
        assert latest["residual"] is not None
        full = client.get(f"/v1/problems/{pid}/residual?series=1")
        assert len(full["series"]) == 2

    def test_control_set_rho(self, api):
        _, _, client, pid, *_ = api
        doc = client.post(
            f"/v1/problems/{pid}/control", {"action": "set_rho", "value": 0.9}
        )
        assert doc["rho"] == 0.9


def read_sse_events(endpoint, pid, count, timeout=5.0, ready=None):
    """Collect `count` SSE events with a raw streaming connection."""
    from urllib.parse import urlsplit

    url = urlsplit(endpoint)
    conn = http.client.HTTPConnection(url.hostname, url.port, timeout=timeout)
    conn.request("GET", f"/v1/problems/{pid}/events")
    resp = conn.getresponse()
    assert resp.status == 200
    assert resp.getheader("Content-Type") == "text/event-stream"
    if ready is not None:
        ready.set()
    events = []
    current = {}
    deadline = time.time() + timeout
    while len(events) < count and time.time() < deadline:
        line = resp.fp.readline()
        if not line:
            break
        line = line.decode().rstrip("\n")
        if line.startswith("event:"):
            current["event"] = line.split(":", 1)[1].strip()
        elif line.startswith("data:"):
            current["data"] = json.loads(line.split(":", 1)[1])
        elif line == "" and current:
            events.append(current)
            current = {}
    conn.close()
    return events


class TestServerSentEvents:
    def test_stream_delivers_residual_and_status(self, api):
        server, store, client, pid, *_ = api
        ready = threading.Event()
        out = {}

        def collect():
            out["events"] = read_sse_events(server.endpoint, pid, 3,
                                            ready=ready)

        t = threading.Thread(target=collect)
        t.start()
        assert ready.wait(2.0)
        store.monitor_once(pid)
        client.post(f"/v1/problems/{pid}/control", {"action": "pause"})
        store.monitor_once(pid)
        t.join(timeout=6.0)
        assert not t.is_alive()
        kinds = [e["event"] for e in out["events"]]
        assert "residual" in kinds
        assert "status" in kinds
        status = next(e for e in out["events"] if e["event"] == "status")
        assert status["data"]["status"] == "paused"


class TestStaticServing:
    def test_root_without_ui(self, api):
        server, _, client, *_ = api
        doc = client.get("/")
        assert doc["service"] == "swarmsolve"

    def test_ui_directory(self, tmp_path):
        (tmp_path / "index.html").write_text("<html>dash</html>")
        (tmp_path / "app.js").write_text("console.log(1)")
        store = sw.ProblemStore()
        server = sw.StoreServer(store, port=0, ui_dir=tmp_path).start()
        try:
            url = server.endpoint.replace("http://", "").split(":")
            conn = http.client.HTTPConnection(url[0], int(url[1]), timeout=5)
            for path, ctype, body in [
                ("/", "text/html", b"dash"),
                ("/index.html", "text/html", b"dash"),
                ("/app.js", "text/javascript", b"console"),
                ("/#ignored", "text/html", b"dash"),
            ]:
                conn.request("GET", path.split("#")[0] or "/")
                resp = conn.getresponse()
                data = resp.read()
                assert resp.status == 200
                assert ctype in resp.getheader("Content-Type")
                assert body in data
            # Unknown client-side routes fall back to the shell.
            conn.request("GET", "/attach/whatever")
            resp = conn.getresponse()
            assert resp.status == 200 and b"dash" in resp.read()
            conn.close()
        finally:
            server.stop()


class TestTransport:
    def test_keepalive_reuses_connection(self, api):
        server, _, client, pid, *_ = api
        sock_before = client._connection().sock
        for _ in range(5):
            client.get(f"/v1/problems/{pid}/meta")
        assert client._connection().sock is sock_before

    def test_nodelay_enabled_on_client(self, api):
        _, _, client, *_ = api
        sock = client._connection().sock
        assert sock.getsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY) != 0

    def test_throughput_floor(self, api):
        # Guards against reintroducing the delayed-ACK stall: 200 round
        # trips must take far less than the 40 ms/request worst case.
        server, store, client, pid, *_ = api
        wid = client.post(f"/v1/problems/{pid}/workers", {})["wid"]
        t0 = time.perf_counter()
        for i in range(200):
            client.put(f"/v1/problems/{pid}/c/1", {"value": float(i),
                                                   "wid": wid})
        elapsed = time.perf_counter() - t0
        assert elapsed < 2.0, f"200 writes took {elapsed:.2f}s"
