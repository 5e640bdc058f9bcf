"""Compile optimization problems into coordinatewise fixed-point systems.

Given a problem ``min g(x) + h(A x)`` with separable ``g`` and ``h``, the
compiler produces an orthogonal coupling matrix, an offset and one scalar map
per coordinate such that fixed points of ``c = m(d), d = G c + f`` encode the
minimizer.  The first ``n`` coordinates carry the solution estimate, the last
``m`` carry the transformed estimate ``A x``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from .core import (
    CoordinateMap,
    NonFiniteError,
    ProblemKind,
    ProblemSpec,
    ReducedSystem,
)

__all__ = [
    "CompileError",
    "Readout",
    "coupling_matrix",
    "compile_problem",
    "update_observation",
    "readout",
    "residual",
]


class CompileError(RuntimeError):
    """Numerical failure while building the coupling matrix."""


def coupling_matrix(A: np.ndarray) -> np.ndarray:
    """Build the orthogonal coupling matrix for a measurement matrix.

    The matrix is the composition of a reflection across the graph
    ``{(x, w): w = A x}`` with a sign flip of the w-block.  It is assembled
    from the Cholesky factorization of the smaller of the two Gram matrices
    ``I + A^T A`` and ``I + A A^T``, costing ``min(m, n)^3``.

    Parameters
    ----------
    A : ndarray, shape (m, n)

    Returns
    -------
    ndarray, shape (n + m, n + m)
        Orthogonal matrix (``G^T G = I`` up to rounding).

    Raises
    ------
    CompileError
        If the Cholesky factorization fails; the message reports a condition
        estimate of the Gram matrix.
    """
    A = np.asarray(A, dtype=np.float64)
    if A.ndim != 2 or A.size == 0:
        raise ValueError("A must be a nonempty 2-D matrix")
    if not np.isfinite(A).all():
        raise NonFiniteError("A must be finite")
    m, n = A.shape
    try:
        with np.errstate(over="ignore"):
            return _coupling_blocks(A, m, n)
    except (LinAlgError, ValueError) as exc:
        with np.errstate(over="ignore"):
            gram = np.eye(n) + A.T @ A if n <= m else np.eye(m) + A @ A.T
        try:
            cond = np.linalg.cond(gram)
        except LinAlgError:
            cond = np.inf
        raise CompileError(
            f"Gram factorization failed (condition estimate {cond:.3e})"
        ) from exc


def _coupling_blocks(A: np.ndarray, m: int, n: int) -> np.ndarray:
    """Closed-form blocks via the smaller Gram factorization."""
    if n <= m:
        S = np.eye(n) + A.T @ A
        Sinv = cho_solve(cho_factor(S, lower=True), np.eye(n))
        ASinv = A @ Sinv
        top_left = 2.0 * Sinv - np.eye(n)
        top_right = -2.0 * (Sinv @ A.T)
        bot_left = 2.0 * ASinv
        bot_right = np.eye(m) - 2.0 * (ASinv @ A.T)
    else:
        T = np.eye(m) + A @ A.T
        Tinv = cho_solve(cho_factor(T, lower=True), np.eye(m))
        AtTinv = A.T @ Tinv
        top_left = np.eye(n) - 2.0 * (AtTinv @ A)
        top_right = -2.0 * AtTinv
        bot_left = 2.0 * (AtTinv.T)
        bot_right = 2.0 * Tinv - np.eye(m)
    return np.block([[top_left, top_right], [bot_left, bot_right]])


def _w_maps(kind: ProblemKind, y: np.ndarray, rho_obj: float) -> list[CoordinateMap]:
    """Per-row maps of the w-block, parameterized by the observation."""
    if kind is ProblemKind.LASSO:
        a = -(1.0 - rho_obj) / (1.0 + rho_obj)
        return [
            CoordinateMap.affine(a=a, b=-2.0 * rho_obj * yj / (1.0 + rho_obj))
            for yj in y
        ]
    if kind is ProblemKind.NNLS:
        return [CoordinateMap.const(-yj) for yj in y]
    # Decoding: reflected proximal map of |w - y_j|, mirrored for the w-block.
    return [CoordinateMap.neg_ssr(t=1.0, shift=yj) for yj in y]


def _x_map(kind: ProblemKind) -> CoordinateMap:
    if kind is ProblemKind.LASSO:
        return CoordinateMap.ssr(t=1.0)
    if kind is ProblemKind.NNLS:
        return CoordinateMap.abs_val()
    return CoordinateMap.identity()


def compile_problem(spec: ProblemSpec, validate: bool = False) -> ReducedSystem:
    """Compile a problem instance into a reduced fixed-point system.

    Parameters
    ----------
    spec : ProblemSpec
    validate : bool
        Also run the orthogonality check on the result (O(K^3); off by
        default because large instances make it expensive).

    Returns
    -------
    ReducedSystem
        ``K = n + m`` coordinates; x-block first, w-block second; offset is
        identically zero for the built-in problem kinds.
    """
    m, n = spec.m, spec.n
    G = coupling_matrix(spec.A)
    K = n + m
    maps = [_x_map(spec.kind)] * n + _w_maps(spec.kind, spec.y, spec.rho_obj)
    system = ReducedSystem(
        K=K,
        G=G,
        f=np.zeros(K),
        maps=tuple(maps),
        x_block=np.arange(n),
        w_block=np.arange(n, K),
        provenance=spec,
    )
    if validate:
        system.validate()
    return system


def update_observation(system: ReducedSystem, y_new: np.ndarray) -> ReducedSystem:
    """Rebuild the w-block maps for a new observation vector.

    The coupling matrix, offset and x-block maps only depend on A and the
    problem kind, so they are reused unchanged.  Passing the current
    observation back in yields bitwise-identical map parameters.

    Parameters
    ----------
    system : ReducedSystem
    y_new : ndarray, shape (m,)

    Returns
    -------
    ReducedSystem
    """
    old = system.provenance
    y_new = np.asarray(y_new, dtype=np.float64).reshape(-1)
    if y_new.shape[0] != old.m:
        raise ValueError(f"y has length {y_new.shape[0]}, expected {old.m}")
    if not np.isfinite(y_new).all():
        raise NonFiniteError("observation must be finite")
    spec = ProblemSpec(
        kind=old.kind, A=old.A, y=y_new, rho_obj=old.rho_obj, name=old.name
    )
    n = old.n
    maps = list(system.maps[:n]) + _w_maps(spec.kind, spec.y, spec.rho_obj)
    return ReducedSystem(
        K=system.K,
        G=system.G,
        f=system.f,
        maps=tuple(maps),
        x_block=system.x_block,
        w_block=system.w_block,
        provenance=spec,
    )


@dataclass(frozen=True)
class Readout:
    """Solution estimate extracted from a (c, d) state pair."""

    x_hat: np.ndarray
    w_hat: np.ndarray


def readout(system: ReducedSystem, c: np.ndarray, d: np.ndarray) -> Readout:
    """Average the two state vectors into a solution estimate.

    On the x-block the estimate is ``(d_j + c_j) / 2``; on the w-block the
    roles flip sign, ``(d_j - c_j) / 2``.  At a fixed point this equals the
    exact minimizer of the source problem.
    """
    c = np.asarray(c, dtype=np.float64)
    d = np.asarray(d, dtype=np.float64)
    if c.shape != (system.K,) or d.shape != (system.K,):
        raise ValueError("state vectors must have length K")
    x_hat = (d[system.x_block] + c[system.x_block]) / 2.0
    w_hat = (d[system.w_block] - c[system.w_block]) / 2.0
    return Readout(x_hat=x_hat, w_hat=w_hat)


def residual(system: ReducedSystem, c: np.ndarray, d: np.ndarray) -> float:
    """Combined fixed-point residual ``||c - m(d)|| + ||d - (G c + f)||``.

    Both terms use the Euclidean norm; the value is zero exactly at a fixed
    point and is the quantity all convergence thresholds refer to.
    """
    c = np.asarray(c, dtype=np.float64)
    d = np.asarray(d, dtype=np.float64)
    if c.shape != (system.K,) or d.shape != (system.K,):
        raise ValueError("state vectors must have length K")
    mismatch = float(np.linalg.norm(c - system.apply_maps(d)))
    drift = float(np.linalg.norm(d - (system.G @ c + system.f)))
    return mismatch + drift
