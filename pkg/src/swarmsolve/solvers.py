"""Local solvers for reduced fixed-point systems.

Two interchangeable drivers:

* iterative: keeps only ``d`` and recomputes ``G m(d) + f`` every step.
* incremental: keeps ``(c, d)`` with ``d = G c + f`` as a maintained
  invariant, updating ``d`` by rank-1 column combinations so a step touching
  few coordinates costs O(K * |updated|) instead of O(K^2).

Both support a blend filter ``rho`` and Bernoulli-style coordinate gating
with probability ``p`` (each step updates a uniformly sampled subset of
expected size ``p * K``).
"""

from __future__ import annotations

import csv
import math
import time
from dataclasses import dataclass

import numpy as np

from .compiler import residual
from .core import ReducedSystem, SolverConfig

__all__ = [
    "DivergenceError",
    "StateDriftError",
    "SolveTrace",
    "sample_index_set",
    "iterative_step",
    "incremental_step",
    "run",
]

# Residual blowing past this multiple of its initial value aborts the run.
_DIVERGENCE_FACTOR = 1e6
# The incremental driver rebuilds d = G c + f this often (in sweeps).
_REFRESH_EVERY = 100
# Invariant bookkeeping thresholds for the incremental step.
_DRIFT_WARN = 1e-8
_DRIFT_FAIL = 1e-6


class DivergenceError(RuntimeError):
    """Residual grew by more than a factor of 1e6 over its initial value."""


class StateDriftError(RuntimeError):
    """The incremental invariant d = G c + f drifted beyond tolerance."""


def sample_index_set(K: int, p: float, rng: np.random.Generator) -> np.ndarray:
    """Sample the coordinates updated in one gated step.

    Each coordinate is included independently with probability ``p``; with
    ``p == 1`` the full range is returned without consuming randomness, so
    ungated runs are deterministic regardless of seed.
    """
    if K <= 0:
        raise ValueError("K must be positive")
    if not (0.0 < p <= 1.0):
        raise ValueError("p must lie in (0, 1]")
    if p == 1.0:
        return np.arange(K)
    return np.flatnonzero(rng.random(K) < p)


def iterative_step(
    system: ReducedSystem,
    d: np.ndarray,
    index_set: np.ndarray,
    rho: float,
) -> np.ndarray:
    """One gated step of the d-only recursion.

    Computes ``t = G m(d) + f`` and blends ``d_j <- rho t_j + (1-rho) d_j``
    on the gated coordinates, leaving the rest untouched.

    Returns
    -------
    ndarray
        New d vector (the input is not modified).
    """
    d = np.asarray(d, dtype=np.float64)
    out = d.copy()
    _iterative_step_inplace(system, out, np.asarray(index_set, dtype=np.intp), rho)
    return out


def _iterative_step_inplace(system, d, idx, rho):
    if idx.size == 0:
        return
    t = system.G @ system.apply_maps(d)
    t += system.f
    if rho == 1.0:
        d[idx] = t[idx]
    else:
        d[idx] = rho * t[idx] + (1.0 - rho) * d[idx]


def incremental_step(
    system: ReducedSystem,
    c: np.ndarray,
    d: np.ndarray,
    index_set: np.ndarray,
    rho: float,
) -> tuple[np.ndarray, np.ndarray]:
    """One gated step of the coupled (c, d) recursion.

    Requires ``d = G c + f`` to hold within 1e-8 on entry (max norm); beyond
    1e-6 the state is considered corrupted and a :class:`StateDriftError` is
    raised.  The gated coordinates of c move toward ``m(d)`` and d receives
    the matching column update so the invariant is preserved.

    Returns
    -------
    (ndarray, ndarray)
        New (c, d) pair (inputs are not modified).
    """
    c = np.asarray(c, dtype=np.float64).copy()
    d = np.asarray(d, dtype=np.float64).copy()
    drift = float(np.abs(d - (system.G @ c + system.f)).max())
    if drift > _DRIFT_FAIL:
        raise StateDriftError(
            f"invariant d = G c + f violated by {drift:.3e} (limit {_DRIFT_FAIL:g})"
        )
    _incremental_step_inplace(
        system, c, d, np.asarray(index_set, dtype=np.intp), rho
    )
    return c, d


def _incremental_step_inplace(system, c, d, idx, rho):
    if idx.size == 0:
        return
    target = system.apply_maps(d)
    if rho == 1.0:
        delta = target[idx] - c[idx]
        c[idx] = target[idx]
    else:
        delta = rho * (target[idx] - c[idx])
        c[idx] += delta
    d += system.G[:, idx] @ delta


@dataclass
class SolveTrace:
    """Result of a local solve.

    Attributes
    ----------
    sweeps : ndarray of int
        Sweep numbers with a recorded residual (starting at 0).
    residuals : ndarray
        Combined residual after each recorded sweep.
    times_ms : ndarray
        Wall-clock milliseconds since the start of the run, per record.
        Excluded from any determinism comparison.
    c, d : ndarray
        Final state pair.
    converged : bool
        Whether the residual threshold was met within the sweep budget.
    sweeps_used : int
        Sweeps actually executed.
    """

    sweeps: np.ndarray
    residuals: np.ndarray
    times_ms: np.ndarray
    c: np.ndarray
    d: np.ndarray
    converged: bool
    sweeps_used: int

    @property
    def final_residual(self) -> float:
        return float(self.residuals[-1])

    def to_csv(self, path) -> None:
        """Write ``sweep,residual,time_ms`` rows plus a final comment block."""
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["sweep", "residual", "time_ms"])
            for s, r, t in zip(self.sweeps, self.residuals, self.times_ms):
                writer.writerow([int(s), f"{r:.12e}", f"{t:.3f}"])
            fh.write(f"# converged,{str(self.converged).lower()}\n")
            fh.write(f"# sweeps_used,{int(self.sweeps_used)}\n")
            fh.write(f"# final_residual,{self.final_residual:.12e}\n")


def run(
    system: ReducedSystem,
    config: SolverConfig,
    init: tuple[np.ndarray, np.ndarray] | None = None,
    on_sweep=None,
) -> SolveTrace:
    """Run a local solver to convergence or the sweep budget.

    Parameters
    ----------
    system : ReducedSystem
    config : SolverConfig
    init : (c0, d0), optional
        Initial state; defaults to ``c = 0, d = f``.  The iterative driver
        uses only ``d0``.
    on_sweep : callable, optional
        Called as ``on_sweep(sweep, c, d)`` after every recorded sweep
        (including sweep 0).  The arrays are live views; copy to keep them.

    Returns
    -------
    SolveTrace

    Raises
    ------
    DivergenceError
        If the residual exceeds 1e6 times its initial value.
    """
    rng = np.random.default_rng(config.seed)
    if init is None:
        c = np.zeros(system.K)
        d = system.f.copy()
    else:
        c = np.asarray(init[0], dtype=np.float64).copy()
        d = np.asarray(init[1], dtype=np.float64).copy()
        if c.shape != (system.K,) or d.shape != (system.K,):
            raise ValueError("init vectors must have length K")
    incremental = config.solver == "incremental"
    rho = config.rho_filter
    steps = config.steps_per_sweep

    start = time.perf_counter()
    sweeps_rec = [0]
    res = residual(system, c, d)
    residuals = [res]
    times = [0.0]
    limit = res * _DIVERGENCE_FACTOR if res > 0.0 else math.inf
    converged = res <= config.epsilon
    sweeps_used = 0
    if on_sweep is not None:
        on_sweep(0, c, d)

    if not converged:
        for sweep in range(1, config.max_sweeps + 1):
            for _ in range(steps):
                idx = sample_index_set(system.K, config.p, rng)
                if incremental:
                    _incremental_step_inplace(system, c, d, idx, rho)
                else:
                    _iterative_step_inplace(system, d, idx, rho)
            if incremental and sweep % _REFRESH_EVERY == 0:
                np.matmul(system.G, c, out=d)
                d += system.f
            if not incremental:
                c = system.apply_maps(d)
            res = residual(system, c, d)
            sweeps_used = sweep
            sweeps_rec.append(sweep)
            residuals.append(res)
            times.append((time.perf_counter() - start) * 1e3)
            if on_sweep is not None:
                on_sweep(sweep, c, d)
            if res <= config.epsilon:
                converged = True
                break
            if res > limit:
                raise DivergenceError(
                    f"residual {res:.3e} exceeds 1e6 x initial after "
                    f"{sweep} sweeps"
                )

    if incremental:
        # Report a consistent pair even between refresh points.
        np.matmul(system.G, c, out=d)
        d += system.f
    return SolveTrace(
        sweeps=np.asarray(sweeps_rec, dtype=np.int64),
        residuals=np.asarray(residuals),
        times_ms=np.asarray(times),
        c=c,
        d=d,
        converged=converged,
        sweeps_used=sweeps_used,
    )
