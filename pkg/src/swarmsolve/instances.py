"""Random problem instance generators with ground truth."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import ProblemKind, ProblemSpec

__all__ = ["GenParams", "GroundTruth", "gen_instance"]


@dataclass(frozen=True)
class GenParams:
    """Parameters for :func:`gen_instance`.

    Parameters
    ----------
    kind : ProblemKind
    m, n : int
        Matrix shape (rows, cols).
    sparsity : int
        Number of nonzeros in the planted lasso solution.
    corruption_fraction : float
        Fraction of corrupted rows for decoding instances; the corrupted
        count ``ceil(fraction * m)`` must stay below half the rows or exact
        recovery is hopeless.
    noise_sigma : float
        Additive Gaussian noise level for lasso observations.
    rho_obj : float
        Regularization weight passed through to lasso specs.
    seed : int
    """

    kind: ProblemKind
    m: int
    n: int
    sparsity: int = 8
    corruption_fraction: float = 0.1
    noise_sigma: float = 0.05
    rho_obj: float = 10.0
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "kind", ProblemKind(self.kind))
        if self.m < 1 or self.n < 1:
            raise ValueError("m and n must be positive")
        if self.kind is ProblemKind.LASSO and not (1 <= self.sparsity <= self.n):
            raise ValueError("sparsity must lie in [1, n]")
        if self.kind is ProblemKind.ECD:
            bad = math.ceil(self.corruption_fraction * self.m)
            if not (0 <= bad < self.m / 2):
                raise ValueError("corrupted rows must number fewer than m/2")


@dataclass(frozen=True)
class GroundTruth:
    """Planted solution (and corruption pattern for decoding instances)."""

    x_true: np.ndarray
    corrupted_rows: np.ndarray | None = None
    corruption: np.ndarray | None = None


def gen_instance(params: GenParams) -> tuple[ProblemSpec, GroundTruth]:
    """Generate a random instance of the requested kind.

    All kinds draw ``A`` with i.i.d. N(0, 1/m) entries.  Lasso plants a
    ``sparsity``-sparse sign vector and adds Gaussian noise; nnls plants a
    clipped Gaussian (so some coordinates sit exactly on the boundary);
    decoding plants a 0/1 codeword and corrupts ``ceil(fraction * m)`` rows
    with standard normal spikes.

    Returns
    -------
    (ProblemSpec, GroundTruth)
    """
    rng = np.random.default_rng(params.seed)
    m, n = params.m, params.n
    A = rng.standard_normal((m, n)) / math.sqrt(m)
    kind = params.kind

    if kind is ProblemKind.LASSO:
        x_true = np.zeros(n)
        support = rng.choice(n, size=params.sparsity, replace=False)
        x_true[support] = rng.choice([-1.0, 1.0], size=params.sparsity)
        y = A @ x_true + params.noise_sigma * rng.standard_normal(m)
        spec = ProblemSpec(kind=kind, A=A, y=y, rho_obj=params.rho_obj)
        return spec, GroundTruth(x_true=x_true)

    if kind is ProblemKind.NNLS:
        x_true = np.maximum(rng.standard_normal(n), 0.0)
        y = A @ x_true + params.noise_sigma * rng.standard_normal(m)
        spec = ProblemSpec(kind=kind, A=A, y=y)
        return spec, GroundTruth(x_true=x_true)

    # Decoding: exact observations on clean rows, spikes on corrupted ones.
    x_true = rng.integers(0, 2, size=n).astype(np.float64)
    bad = math.ceil(params.corruption_fraction * m)
    rows = rng.choice(m, size=bad, replace=False)
    z = rng.standard_normal(bad)
    y = A @ x_true
    y[rows] += z
    spec = ProblemSpec(kind=kind, A=A, y=y)
    return spec, GroundTruth(x_true=x_true, corrupted_rows=rows, corruption=z)
