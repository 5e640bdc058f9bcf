"""Command line interface.

Subcommands cover the full workflow: generate an instance, compile it,
solve locally, serve a store, attach workers over HTTP, read out and verify
solutions, export residual traces and push observation updates.

File formats (all JSON unless noted):

* problem: ``{kind, A: {rows, cols, data}, y, rho_obj, name?}`` with the
  matrix data row-major.
* system: ``{K, G, f, maps, x_block, w_block, provenance}`` with G row-major
  and 1-based block indices.
* solution: ``{x_hat, w_hat, residual, converged?, sweeps_used?}``.
* state: ``{c, d}``.
* trace: CSV ``sweep,residual,time_ms`` plus ``#``-prefixed summary rows.
"""

from __future__ import annotations

import argparse
import json
import signal
import sys
import threading
import time
from pathlib import Path

import numpy as np

from .compiler import compile_problem, readout, residual
from .core import ProblemSpec, ReducedSystem, SolverConfig
from .instances import GenParams, gen_instance
from .server import StoreServer
from .solvers import run as run_solver
from .store import ProblemStore
from .verify import verify_optimality
from .worker import StoreClient, Worker, WorkerConfig, WorkerPool

__all__ = ["main"]


def _read_json(path):
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def _write_json(path, doc) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh)
        fh.write("\n")


def _solution_doc(system: ReducedSystem, c, d, extra=None) -> dict:
    ro = readout(system, c, d)
    doc = {
        "x_hat": ro.x_hat.tolist(),
        "w_hat": ro.w_hat.tolist(),
        "residual": residual(system, c, d),
    }
    if extra:
        doc.update(extra)
    return doc


# -- subcommand handlers -----------------------------------------------------


def cmd_gen(args) -> int:
    params = GenParams(
        kind=args.kind,
        m=args.m,
        n=args.n,
        sparsity=args.sparsity,
        corruption_fraction=args.corruption,
        noise_sigma=args.sigma,
        rho_obj=args.rho_obj,
        seed=args.seed,
    )
    spec, truth = gen_instance(params)
    _write_json(args.out, spec.to_doc())
    print(f"wrote {args.kind} instance ({args.m}x{args.n}) to {args.out}")
    if args.truth:
        doc = {"x_true": truth.x_true.tolist()}
        if truth.corrupted_rows is not None:
            doc["corrupted_rows"] = (truth.corrupted_rows + 1).tolist()
            doc["corruption"] = truth.corruption.tolist()
        _write_json(args.truth, doc)
        print(f"wrote ground truth to {args.truth}")
    return 0


def cmd_compile(args) -> int:
    spec = ProblemSpec.from_doc(_read_json(args.problem))
    system = compile_problem(spec, validate=not args.no_validate)
    _write_json(args.out, system.to_doc())
    print(
        f"compiled {spec.kind.value} ({spec.m}x{spec.n}) into K={system.K} "
        f"coordinates -> {args.out}"
    )
    return 0


def cmd_solve_local(args) -> int:
    system = ReducedSystem.from_doc(_read_json(args.system))
    rho = 1.0 if args.unfiltered else args.rho
    config = SolverConfig(
        solver=args.solver,
        filtered=not args.unfiltered,
        rho_filter=rho,
        p=args.p,
        max_sweeps=args.max_sweeps,
        epsilon=args.epsilon,
        seed=args.seed,
    )
    init = None
    if args.init_state:
        state = _read_json(args.init_state)
        init = (np.asarray(state["c"]), np.asarray(state["d"]))
    trace = run_solver(system, config, init=init)
    status = "converged" if trace.converged else "NOT converged"
    print(
        f"{status} after {trace.sweeps_used} sweeps, "
        f"residual {trace.final_residual:.3e}"
    )
    if args.trace:
        trace.to_csv(args.trace)
        print(f"wrote trace to {args.trace}")
    if args.state:
        _write_json(args.state, {"c": trace.c.tolist(), "d": trace.d.tolist()})
    if args.out:
        _write_json(
            args.out,
            _solution_doc(
                system,
                trace.c,
                trace.d,
                {"converged": trace.converged, "sweeps_used": trace.sweeps_used},
            ),
        )
        print(f"wrote solution to {args.out}")
    return 0 if trace.converged else 3


def cmd_serve(args) -> int:
    store = ProblemStore(data_dir=args.data_dir)
    ui_dir = args.ui
    if ui_dir is None:
        bundled = Path(__file__).resolve().parent.parent.parent.parent / (
            "frontend/dist"
        )
        if bundled.is_dir():
            ui_dir = bundled
    server = StoreServer(
        store,
        host=args.host,
        port=args.port,
        ui_dir=ui_dir,
        monitor_period=args.monitor_period,
    )
    server.start()
    print(f"serving on {server.endpoint}  (ctrl-c to stop)")
    if ui_dir:
        print(f"dashboard: {server.endpoint}/")
    stop = threading.Event()

    def _sig(*_):
        stop.set()

    signal.signal(signal.SIGINT, _sig)
    signal.signal(signal.SIGTERM, _sig)
    try:
        while not stop.wait(0.5):
            pass
    finally:
        server.stop()
    return 0


def cmd_create(args) -> int:
    client = StoreClient(args.endpoint)
    system_doc = _read_json(args.system)
    body = {"system": system_doc, "rho": args.rho}
    if args.name:
        body["meta"] = {"name": args.name}
    if args.request_id:
        body["request_id"] = args.request_id
    doc = client.post("/v1/problems", body)
    pid = doc["pid"]
    print(f"pid: {pid}")
    print(f"attach: {args.endpoint.rstrip('/')}/#/attach/{pid}")
    return 0


def _parse_latency(text):
    if not text:
        return None
    lo, _, hi = text.partition(":")
    lo_ms = float(lo)
    hi_ms = float(hi) if hi else lo_ms
    return (lo_ms / 1e3, hi_ms / 1e3)


def cmd_work(args) -> int:
    config = WorkerConfig(
        endpoint=args.endpoint,
        pid=args.pid,
        rho=args.rho,
        seed=args.seed,
        platform=args.platform,
        latency=_parse_latency(args.latency),
        batch=args.batch,
    )
    pool = WorkerPool(config, args.workers)
    stop = pool.stop_event

    def _sig(*_):
        stop.set()

    signal.signal(signal.SIGINT, _sig)
    signal.signal(signal.SIGTERM, _sig)
    pool.start(max_updates=args.max_updates)
    pool.join()
    for w in pool.workers:
        print(f"{w.wid}: {w.updates} updates")
    print(f"total: {pool.total_updates} updates")
    return 0


def cmd_readout(args) -> int:
    if args.endpoint and args.pid:
        doc = StoreClient(args.endpoint).get(f"/v1/problems/{args.pid}/readout")
    elif args.system and args.state:
        system = ReducedSystem.from_doc(_read_json(args.system))
        state = _read_json(args.state)
        doc = _solution_doc(
            system, np.asarray(state["c"]), np.asarray(state["d"])
        )
    else:
        print(
            "readout needs either --endpoint and --pid, or --system and --state",
            file=sys.stderr,
        )
        return 2
    if args.out:
        _write_json(args.out, doc)
        print(f"wrote solution to {args.out}")
    else:
        print(json.dumps(doc))
    return 0


def cmd_verify(args) -> int:
    spec = ProblemSpec.from_doc(_read_json(args.problem))
    doc = _read_json(args.solution)
    x_hat = doc["x_hat"] if isinstance(doc, dict) else doc
    report = verify_optimality(spec, np.asarray(x_hat, dtype=np.float64), tol=args.tol)
    print(report.summary())
    for line in report.failures:
        print(f"  {line}")
    return 0 if report.passed else 1


def cmd_trace(args) -> int:
    doc = StoreClient(args.endpoint).get(
        f"/v1/problems/{args.pid}/residual?series=1"
    )
    rows = doc.get("series", [])
    meta = StoreClient(args.endpoint).get(f"/v1/problems/{args.pid}/meta")
    K = int(meta.get("K", 1)) or 1
    t0 = rows[0]["t"] if rows else 0.0
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write("sweep,residual,time_ms\n")
        for row in rows:
            sweep = row["updates"] // K
            fh.write(
                f"{sweep},{row['residual']:.12e},{(row['t'] - t0) * 1e3:.3f}\n"
            )
        if rows:
            fh.write(f"# updates_total,{rows[-1]['updates']}\n")
            fh.write(f"# final_residual,{rows[-1]['residual']:.12e}\n")
    print(f"wrote {len(rows)} samples to {args.out}")
    return 0


def cmd_observe(args) -> int:
    doc = _read_json(args.y)
    y = doc["y"] if isinstance(doc, dict) else doc
    resp = StoreClient(args.endpoint).post(
        f"/v1/problems/{args.pid}/observation", {"y": y}
    )
    print(f"observation applied, epoch {resp.get('epoch')}")
    return 0


# -- parser ------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="swarmsolve",
        description="Distributed fixed-point solver service",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a random problem instance")
    p.add_argument("--kind", required=True, choices=["lasso", "nnls", "ecd"])
    p.add_argument("--m", type=int, required=True, help="rows of A")
    p.add_argument("--n", type=int, required=True, help="cols of A")
    p.add_argument("--sparsity", type=int, default=8)
    p.add_argument("--corruption", type=float, default=0.1)
    p.add_argument("--sigma", type=float, default=0.05)
    p.add_argument("--rho-obj", type=float, default=10.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--out", required=True)
    p.add_argument("--truth", help="also write the planted solution")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("compile", help="compile a problem into a system")
    p.add_argument("problem")
    p.add_argument("-o", "--out", required=True)
    p.add_argument("--no-validate", action="store_true")
    p.set_defaults(func=cmd_compile)

    p = sub.add_parser("solve-local", help="solve a system in this process")
    p.add_argument("system")
    p.add_argument("--solver", choices=["iterative", "incremental"],
                   default="incremental")
    p.add_argument("--rho", type=float, default=0.5, help="blend weight")
    p.add_argument("--unfiltered", action="store_true", help="force rho = 1")
    p.add_argument("--p", type=float, default=1.0, help="gating probability")
    p.add_argument("--epsilon", type=float, default=1e-8)
    p.add_argument("--max-sweeps", type=int, default=10000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--trace", help="residual trace CSV")
    p.add_argument("--state", help="write final state JSON")
    p.add_argument("--init-state", help="start from a state JSON")
    p.add_argument("-o", "--out", help="write solution JSON")
    p.set_defaults(func=cmd_solve_local)

    p = sub.add_parser("serve", help="run the problem store service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8700)
    p.add_argument("--data-dir", help="enable persistence under this directory")
    p.add_argument("--ui", help="serve a dashboard build from this directory")
    p.add_argument("--monitor-period", type=float, default=0.25)
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("create", help="register a compiled system with a store")
    p.add_argument("system")
    p.add_argument("--endpoint", required=True)
    p.add_argument("--rho", type=float, default=0.5)
    p.add_argument("--name", default="")
    p.add_argument("--request-id", default="")
    p.set_defaults(func=cmd_create)

    p = sub.add_parser("work", help="run workers against a store")
    p.add_argument("--endpoint", required=True)
    p.add_argument("--pid", required=True)
    p.add_argument("--rho", type=float, default=None,
                   help="blend weight (default: follow the store)")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--platform", default="")
    p.add_argument("--latency", default="",
                   help="artificial delay in ms, e.g. 50 or 0:200")
    p.add_argument("--batch", type=int, default=1)
    p.add_argument("--max-updates", type=int, default=None,
                   help="stop each worker after this many updates")
    p.set_defaults(func=cmd_work)

    p = sub.add_parser("readout", help="extract a solution estimate")
    p.add_argument("--endpoint")
    p.add_argument("--pid")
    p.add_argument("--system")
    p.add_argument("--state")
    p.add_argument("-o", "--out")
    p.set_defaults(func=cmd_readout)

    p = sub.add_parser("verify", help="certify a solution against its problem")
    p.add_argument("problem")
    p.add_argument("solution", help="solution JSON (or bare x_hat list)")
    p.add_argument("--tol", type=float, default=1e-4)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("trace", help="export a store residual trace to CSV")
    p.add_argument("--endpoint", required=True)
    p.add_argument("--pid", required=True)
    p.add_argument("-o", "--out", required=True)
    p.set_defaults(func=cmd_trace)

    p = sub.add_parser("observe", help="push a new observation vector")
    p.add_argument("--endpoint", required=True)
    p.add_argument("--pid", required=True)
    p.add_argument("y", help="JSON file with the new observation")
    p.set_defaults(func=cmd_observe)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
