"""Solution certificates and a brute-force reference oracle.

Each problem kind gets an independent optimality check that never runs the
fixed-point machinery: lasso and nnls via first-order (KKT) conditions,
decoding via an exact enumeration oracle on small instances and a dual
feasibility certificate on larger ones.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from .core import ProblemKind, ProblemSpec

__all__ = ["OracleFailure", "VerifyReport", "l1_oracle", "verify_optimality"]

# Brute-force enumeration is only tractable for tiny shapes.
_ORACLE_MAX_N = 4
_ORACLE_MAX_M = 10


class OracleFailure(RuntimeError):
    """The enumeration oracle found no usable basis (degenerate matrix)."""


@dataclass
class VerifyReport:
    """Outcome of an optimality check.

    Attributes
    ----------
    passed : bool
    kind : ProblemKind
    tol : float
        Tolerance the margins were compared against.
    margins : dict
        Named worst-case violations (all should be <= tol when passed).
    failures : list of str
        Human-readable description of each violated condition.
    """

    passed: bool
    kind: ProblemKind
    tol: float
    margins: dict[str, float] = field(default_factory=dict)
    failures: list[str] = field(default_factory=list)

    def summary(self) -> str:
        verdict = "optimal" if self.passed else "NOT optimal"
        worst = max(self.margins.values()) if self.margins else 0.0
        return (
            f"{self.kind.value}: {verdict} "
            f"(tol {self.tol:g}, worst margin {worst:.3e})"
        )


def l1_oracle(A: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, float]:
    """Exact minimizer of ``||A x - y||_1`` by basis enumeration.

    A minimizer of the least-absolute-deviations problem exists at a point
    where ``n`` residual rows vanish, so trying every row subset of size
    ``n`` and solving the square system enumerates all candidate vertices.

    Parameters
    ----------
    A : ndarray, shape (m, n)
        Requires ``n <= 4`` and ``m <= 10``; larger shapes are refused.
    y : ndarray, shape (m,)

    Returns
    -------
    (x, objective)
        Tie between bases is broken by the lexicographically smallest x.

    Raises
    ------
    OracleFailure
        If every row subset is singular.
    """
    A = np.asarray(A, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    m, n = A.shape
    if n > _ORACLE_MAX_N or m > _ORACLE_MAX_M:
        raise ValueError(
            f"oracle limited to n <= {_ORACLE_MAX_N}, m <= {_ORACLE_MAX_M}"
        )
    if m < n:
        raise ValueError("oracle requires m >= n")
    best_x = None
    best_obj = math.inf
    for rows in combinations(range(m), n):
        sub = A[list(rows)]
        try:
            x = np.linalg.solve(sub, y[list(rows)])
        except np.linalg.LinAlgError:
            continue
        if not np.isfinite(x).all():
            continue
        obj = float(np.abs(A @ x - y).sum())
        if obj < best_obj - 1e-12 * (1.0 + abs(best_obj)):
            best_obj, best_x = obj, x
        elif abs(obj - best_obj) <= 1e-12 * (1.0 + abs(best_obj)):
            if best_x is None or tuple(x) < tuple(best_x):
                best_obj, best_x = min(best_obj, obj), x
    if best_x is None:
        raise OracleFailure("all row subsets are singular")
    return best_x, best_obj


def _verify_lasso(spec: ProblemSpec, x: np.ndarray, tol: float) -> VerifyReport:
    """Subgradient conditions for ``0.5 rho ||A x - y||^2 + ||x||_1``.

    Stationarity requires ``g = rho A^T (A x - y)`` to satisfy ``g_i = -1``
    on positive coordinates, ``g_i = +1`` on negative ones and ``|g_i| <= 1``
    on zeros.  Coordinates within ``sqrt(tol)`` of zero count as zero.
    """
    g = spec.rho_obj * (spec.A.T @ (spec.A @ x - spec.y))
    zero_tol = math.sqrt(tol)
    is_zero = np.abs(x) <= zero_tol
    margins = {
        "sign_stationarity": 0.0,
        "zero_subgradient": 0.0,
    }
    if (~is_zero).any():
        margins["sign_stationarity"] = float(
            np.abs(g[~is_zero] + np.sign(x[~is_zero])).max()
        )
    if is_zero.any():
        margins["zero_subgradient"] = float(
            np.maximum(np.abs(g[is_zero]) - 1.0, 0.0).max()
        )
    failures = [
        f"{name} margin {val:.3e} exceeds tol {tol:g}"
        for name, val in margins.items()
        if val > tol
    ]
    return VerifyReport(not failures, spec.kind, tol, margins, failures)


def _verify_nnls(spec: ProblemSpec, x: np.ndarray, tol: float) -> VerifyReport:
    """KKT conditions for ``0.5 ||A x - y||^2 s.t. x >= 0``.

    Primal feasibility ``x >= 0``, dual feasibility ``A^T (A x - y) >= 0``
    and complementary slackness ``x_i g_i = 0``, all within tol.
    """
    g = spec.A.T @ (spec.A @ x - spec.y)
    margins = {
        "primal_feasibility": float(np.maximum(-x, 0.0).max()),
        "dual_feasibility": float(np.maximum(-g, 0.0).max()),
        "complementarity": float(np.abs(x * g).max()),
    }
    failures = [
        f"{name} margin {val:.3e} exceeds tol {tol:g}"
        for name, val in margins.items()
        if val > tol
    ]
    return VerifyReport(not failures, spec.kind, tol, margins, failures)


def _verify_ecd(spec: ProblemSpec, x: np.ndarray, tol: float) -> VerifyReport:
    """Optimality of ``min ||A x - y||_1``.

    Small instances compare the objective against the exact enumeration
    oracle.  Larger ones certify via duality: split rows into active
    (``|r_i| <= sqrt(tol)``) and inactive; the subgradient on inactive rows
    is ``sign(r_i)``, a least-squares fit finds the free dual entries on
    active rows, and optimality needs ``A^T v ~= 0`` with ``|v| <= 1``.
    """
    r = spec.A @ x - spec.y
    obj = float(np.abs(r).sum())
    if spec.n <= _ORACLE_MAX_N and spec.m <= _ORACLE_MAX_M:
        _, best = l1_oracle(spec.A, spec.y)
        margins = {"objective_gap": float(obj - best)}
        failures = (
            []
            if margins["objective_gap"] <= tol
            else [
                f"objective {obj:.6e} exceeds oracle optimum {best:.6e} "
                f"by more than tol {tol:g}"
            ]
        )
        return VerifyReport(not failures, spec.kind, tol, margins, failures)

    active = np.abs(r) <= math.sqrt(tol)
    sgn = np.sign(r[~active])
    rhs = -spec.A[~active].T @ sgn
    scale = 1.0 + float(np.abs(rhs).max()) if rhs.size else 1.0
    if active.any():
        u, *_ = np.linalg.lstsq(spec.A[active].T, rhs, rcond=None)
        station = float(np.abs(spec.A[active].T @ u - rhs).max())
        box = float(np.maximum(np.abs(u) - 1.0, 0.0).max())
    else:
        station = float(np.abs(rhs).max())
        box = 0.0
    margins = {
        "dual_stationarity": station / scale,
        "dual_box": box,
    }
    failures = [
        f"{name} margin {val:.3e} exceeds tol {tol:g}"
        for name, val in margins.items()
        if val > tol
    ]
    return VerifyReport(not failures, spec.kind, tol, margins, failures)


def verify_optimality(
    spec: ProblemSpec, x_hat: np.ndarray, tol: float = 1e-4
) -> VerifyReport:
    """Certify a candidate solution against its source problem.

    Parameters
    ----------
    spec : ProblemSpec
    x_hat : ndarray, shape (n,)
    tol : float
        Margin tolerance for every condition.

    Returns
    -------
    VerifyReport
    """
    x_hat = np.asarray(x_hat, dtype=np.float64).reshape(-1)
    if x_hat.shape[0] != spec.n:
        raise ValueError(f"x_hat has length {x_hat.shape[0]}, expected {spec.n}")
    if not np.isfinite(x_hat).all():
        raise ValueError("x_hat must be finite")
    if tol <= 0.0:
        raise ValueError("tol must be positive")
    if spec.kind is ProblemKind.LASSO:
        return _verify_lasso(spec, x_hat, tol)
    if spec.kind is ProblemKind.NNLS:
        return _verify_nnls(spec, x_hat, tol)
    return _verify_ecd(spec, x_hat, tol)
