import numpy as np
import pytest

import swarmsolve as sw


@pytest.fixture
def toy_nnls():
    """1x1 nonnegative least squares with a hand-checkable fixed point."""
    spec = sw.ProblemSpec(kind="nnls", A=[[1.0]], y=[3.0])
    return spec, sw.compile_problem(spec, validate=True)


@pytest.fixture
def toy_lasso():
    spec = sw.ProblemSpec(kind="lasso", A=[[1.0]], y=[3.0], rho_obj=2.0)
    return spec, sw.compile_problem(spec, validate=True)


def small_instance(kind: str, seed: int = 0):
    shapes = {"lasso": (6, 10, 3), "nnls": (10, 6, 0), "ecd": (12, 4, 0)}
    m, n, k = shapes[kind]
    params = sw.GenParams(
        kind=kind,
        m=m,
        n=n,
        sparsity=max(k, 1),
        rho_obj=4.0,
        seed=seed,
    )
    return sw.gen_instance(params)


@pytest.fixture
def live_server():
    """In-process store + HTTP server; yields (server, store)."""
    store = sw.ProblemStore()
    server = sw.StoreServer(store, port=0, monitor_period=0.1).start()
    yield server, store
    server.stop()


def solve_reference(spec: sw.ProblemSpec, epsilon=1e-10, max_sweeps=20000):
    """Independent-path local solve used as a baseline in service tests."""
    system = sw.compile_problem(spec)
    trace = sw.run(
        system,
        sw.SolverConfig(
            solver="incremental",
            filtered=True,
            rho_filter=0.5,
            epsilon=epsilon,
            max_sweeps=max_sweeps,
        ),
    )
    assert trace.converged
    return sw.readout(system, trace.c, trace.d)
