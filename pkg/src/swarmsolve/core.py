"""Core types for coordinatewise fixed-point systems.

A reduced system couples two vectors ``c`` and ``d`` of total length ``K``
through an orthogonal matrix ``G`` and an offset ``f``::

    c* = m(d*),   d* = G c* + f

where ``m`` applies an independent 1-Lipschitz scalar map to every
coordinate.  This module defines the scalar map vocabulary, its evaluation
(scalar and vectorized), and the dataclasses shared by the compiler, the
solvers and the network service.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from functools import cached_property
from typing import Any, Sequence

import numpy as np

__all__ = [
    "MapKind",
    "CoordinateMap",
    "ProblemKind",
    "ProblemSpec",
    "ReducedSystem",
    "SolverConfig",
    "NonFiniteError",
    "eval_map",
    "eval_m",
    "nonexpansive_probe",
]


class NonFiniteError(ValueError):
    """A value that must be finite is NaN or infinite."""


class MapKind(str, Enum):
    """Vocabulary of scalar coordinate maps.

    Every kind is 1-Lipschitz (nonexpansive) by construction, which is what
    guarantees the fixed-point iteration cannot diverge.
    """

    SSR = "SSR"
    NEG_SSR = "NEG_SSR"
    ABS = "ABS"
    AFFINE = "AFFINE"
    CONST = "CONST"
    IDENTITY = "IDENTITY"


def _soft_shrink_reflect(u, t):
    """Piecewise map: -u inside [-t, t], u - 2 t sign(u) outside."""
    return np.where(np.abs(u) <= t, -u, u - 2.0 * t * np.sign(u))


@dataclass(frozen=True)
class CoordinateMap:
    """One scalar map ``u -> m(u)``, optionally recentered at ``shift``.

    Parameters
    ----------
    kind : MapKind
        Which scalar map to apply.
    t : float, optional
        Threshold for SSR / NEG_SSR.  Must be positive.
    a, b : float, optional
        Slope and offset for AFFINE.  Nonexpansiveness requires ``|a| <= 1``.
    v : float, optional
        Value for CONST.
    shift : float, optional
        Recenter the map at ``s``: ``u -> s + base(u - s)`` for every kind
        except NEG_SSR, which negates after the shifted shrink,
        ``u -> -(s + SSR(u - s))``.
    """

    kind: MapKind
    t: float | None = None
    a: float | None = None
    b: float | None = None
    v: float | None = None
    shift: float | None = None

    def __post_init__(self):
        kind = MapKind(self.kind)
        object.__setattr__(self, "kind", kind)
        for name in ("t", "a", "b", "v", "shift"):
            val = getattr(self, name)
            if val is None:
                continue
            val = float(val)
            if not math.isfinite(val):
                raise NonFiniteError(f"map parameter {name!r} must be finite")
            object.__setattr__(self, name, val)
        if kind in (MapKind.SSR, MapKind.NEG_SSR):
            if self.t is None or self.t <= 0.0:
                raise ValueError(f"{kind.value} requires a positive threshold t")
        elif kind is MapKind.AFFINE:
            if self.a is None or self.b is None:
                raise ValueError("AFFINE requires slope a and offset b")
            if abs(self.a) > 1.0:
                raise ValueError("AFFINE slope must satisfy |a| <= 1")
        elif kind is MapKind.CONST:
            if self.v is None:
                raise ValueError("CONST requires a value v")

    # -- constructors ------------------------------------------------------

    @classmethod
    def ssr(cls, t: float = 1.0, shift: float | None = None) -> "CoordinateMap":
        return cls(MapKind.SSR, t=t, shift=shift)

    @classmethod
    def neg_ssr(cls, t: float = 1.0, shift: float | None = None) -> "CoordinateMap":
        return cls(MapKind.NEG_SSR, t=t, shift=shift)

    @classmethod
    def abs_val(cls, shift: float | None = None) -> "CoordinateMap":
        return cls(MapKind.ABS, shift=shift)

    @classmethod
    def affine(cls, a: float, b: float) -> "CoordinateMap":
        return cls(MapKind.AFFINE, a=a, b=b)

    @classmethod
    def const(cls, v: float) -> "CoordinateMap":
        return cls(MapKind.CONST, v=v)

    @classmethod
    def identity(cls, shift: float | None = None) -> "CoordinateMap":
        return cls(MapKind.IDENTITY, shift=shift)

    # -- serialization -----------------------------------------------------

    def to_doc(self) -> dict[str, Any]:
        """JSON-ready dict with only the parameters the kind uses."""
        doc: dict[str, Any] = {"kind": self.kind.value}
        if self.kind in (MapKind.SSR, MapKind.NEG_SSR):
            doc["t"] = self.t
        elif self.kind is MapKind.AFFINE:
            doc["a"] = self.a
            doc["b"] = self.b
        elif self.kind is MapKind.CONST:
            doc["v"] = self.v
        if self.shift is not None:
            doc["shift"] = self.shift
        return doc

    @classmethod
    def from_doc(cls, doc: dict[str, Any]) -> "CoordinateMap":
        known = {"kind", "t", "a", "b", "v", "shift"}
        extra = set(doc) - known
        if extra:
            raise ValueError(f"unknown map fields: {sorted(extra)}")
        return cls(
            kind=MapKind(doc["kind"]),
            t=doc.get("t"),
            a=doc.get("a"),
            b=doc.get("b"),
            v=doc.get("v"),
            shift=doc.get("shift"),
        )

    # -- evaluation --------------------------------------------------------

    def _apply_centered(self, u):
        """Evaluate the base map (shift already subtracted where relevant)."""
        kind = self.kind
        if kind is MapKind.SSR:
            return _soft_shrink_reflect(u, self.t)
        if kind is MapKind.NEG_SSR:
            return _soft_shrink_reflect(-u, self.t)
        if kind is MapKind.ABS:
            return np.abs(u)
        if kind is MapKind.AFFINE:
            return self.a * u + self.b
        if kind is MapKind.CONST:
            return np.full_like(u, self.v) if np.ndim(u) else np.float64(self.v)
        return +u

    def apply(self, u):
        """Evaluate the map on a float or ndarray, honoring the shift."""
        if self.shift is None:
            return self._apply_centered(u)
        s = self.shift
        if self.kind is MapKind.NEG_SSR:
            # Negation happens after the shifted shrink so that the map stays
            # the mirrored counterpart of a shifted SSR.
            return -(s + _soft_shrink_reflect(u - s, self.t))
        return s + self._apply_centered(u - s)


def eval_map(cmap: CoordinateMap, u: float) -> float:
    """Evaluate one coordinate map at a scalar point.

    Parameters
    ----------
    cmap : CoordinateMap
    u : float
        Must be finite.

    Returns
    -------
    float
    """
    u = float(u)
    if not math.isfinite(u):
        raise NonFiniteError("map input must be finite")
    return float(cmap.apply(np.float64(u)))


class MapTable:
    """Vectorized evaluator for one coordinate map per entry of a vector.

    Coordinates are grouped by (kind, has-shift) with per-coordinate parameter
    arrays, so evaluating a K-vector costs a handful of numpy kernels instead
    of K Python calls.  The arithmetic matches :func:`eval_map` operation for
    operation, so the result is bitwise equal to evaluating coordinatewise.
    """

    def __init__(self, maps: Sequence[CoordinateMap]):
        self.maps = tuple(maps)
        self.size = len(self.maps)
        groups: dict[tuple[MapKind, bool], list[int]] = {}
        for i, m in enumerate(self.maps):
            if not isinstance(m, CoordinateMap):
                raise TypeError("map table entries must be CoordinateMap")
            groups.setdefault((m.kind, m.shift is not None), []).append(i)
        self._groups = []
        for (kind, shifted), idx_list in groups.items():
            idx = np.asarray(idx_list, dtype=np.intp)
            sel = [self.maps[i] for i in idx_list]
            params = {
                "t": np.array([m.t if m.t is not None else 0.0 for m in sel]),
                "a": np.array([m.a if m.a is not None else 0.0 for m in sel]),
                "b": np.array([m.b if m.b is not None else 0.0 for m in sel]),
                "v": np.array([m.v if m.v is not None else 0.0 for m in sel]),
                "s": np.array([m.shift if m.shift is not None else 0.0 for m in sel]),
            }
            self._groups.append((kind, shifted, idx, params))

    def __call__(self, d: np.ndarray, out: np.ndarray | None = None) -> np.ndarray:
        if d.shape != (self.size,):
            raise ValueError(f"expected vector of length {self.size}, got {d.shape}")
        if out is None:
            out = np.empty(self.size)
        for kind, shifted, idx, p in self._groups:
            u = d[idx]
            if kind is MapKind.SSR:
                if shifted:
                    out[idx] = p["s"] + _soft_shrink_reflect(u - p["s"], p["t"])
                else:
                    out[idx] = _soft_shrink_reflect(u, p["t"])
            elif kind is MapKind.NEG_SSR:
                if shifted:
                    out[idx] = -(p["s"] + _soft_shrink_reflect(u - p["s"], p["t"]))
                else:
                    out[idx] = _soft_shrink_reflect(-u, p["t"])
            elif kind is MapKind.ABS:
                out[idx] = p["s"] + np.abs(u - p["s"]) if shifted else np.abs(u)
            elif kind is MapKind.AFFINE:
                r = p["a"] * u + p["b"]
                out[idx] = p["s"] + r if shifted else r
            elif kind is MapKind.CONST:
                out[idx] = p["s"] + p["v"] if shifted else p["v"]
            else:
                out[idx] = p["s"] + (u - p["s"]) if shifted else u
        return out


def eval_m(maps: Sequence[CoordinateMap], d: np.ndarray) -> np.ndarray:
    """Apply a table of coordinate maps to a vector, coordinatewise.

    Parameters
    ----------
    maps : sequence of CoordinateMap
        One map per coordinate, ``len(maps) == len(d)``.
    d : ndarray
        Finite input vector.

    Returns
    -------
    ndarray
        ``[maps[0](d[0]), ..., maps[K-1](d[K-1])]``, bitwise equal to the
        concatenation of :func:`eval_map` calls.
    """
    d = np.asarray(d, dtype=np.float64)
    if d.ndim != 1 or len(maps) != d.shape[0]:
        raise ValueError("map table and input vector lengths differ")
    if not np.isfinite(d).all():
        raise NonFiniteError("map input must be finite")
    return MapTable(maps)(d)


def nonexpansive_probe(
    cmap: CoordinateMap, trials: int = 1000, rng_seed: int = 0
) -> bool:
    """Empirically test ``|m(u) - m(v)| <= |u - v|`` on random pairs.

    Points are drawn symmetrically around zero at scales 1, 10 and 100 so the
    probe straddles every kink of the piecewise maps.  A small additive slack
    (1e-12) absorbs rounding in the comparison.
    """
    if trials <= 0:
        raise ValueError("trials must be positive")
    rng = np.random.default_rng(rng_seed)
    scale = 10.0 ** rng.integers(0, 3, size=trials)
    u = rng.standard_normal(trials) * scale
    v = rng.standard_normal(trials) * scale
    mu = cmap.apply(u)
    mv = cmap.apply(v)
    return bool(np.all(np.abs(mu - mv) <= np.abs(u - v) + 1e-12))


class ProblemKind(str, Enum):
    """Supported source problems."""

    LASSO = "lasso"
    NNLS = "nnls"
    ECD = "ecd"


def _readonly(arr: np.ndarray) -> np.ndarray:
    out = np.array(arr, dtype=np.float64, copy=True)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class ProblemSpec:
    """A concrete optimization problem instance.

    Parameters
    ----------
    kind : ProblemKind
        ``lasso`` (l1-regularized least squares), ``nnls`` (nonnegative least
        squares) or ``ecd`` (exact decoding / least absolute deviations).
    A : ndarray, shape (m, n)
        Measurement matrix.
    y : ndarray, shape (m,)
        Observation vector.
    rho_obj : float
        Regularization weight (lasso only; must be positive there).
    name : str
        Free-form label carried through serialization.
    """

    kind: ProblemKind
    A: np.ndarray
    y: np.ndarray
    rho_obj: float = 1.0
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "kind", ProblemKind(self.kind))
        A = np.asarray(self.A, dtype=np.float64)
        if A.ndim != 2 or A.size == 0:
            raise ValueError("A must be a nonempty 2-D matrix")
        y = np.asarray(self.y, dtype=np.float64).reshape(-1)
        if y.shape[0] != A.shape[0]:
            raise ValueError(
                f"y has length {y.shape[0]}, expected {A.shape[0]} rows of A"
            )
        if not np.isfinite(A).all() or not np.isfinite(y).all():
            raise NonFiniteError("A and y must be finite")
        rho_obj = float(self.rho_obj)
        if not math.isfinite(rho_obj):
            raise NonFiniteError("rho_obj must be finite")
        if self.kind is ProblemKind.LASSO and rho_obj <= 0.0:
            raise ValueError("lasso requires rho_obj > 0")
        object.__setattr__(self, "A", _readonly(A))
        object.__setattr__(self, "y", _readonly(y))
        object.__setattr__(self, "rho_obj", rho_obj)

    @property
    def m(self) -> int:
        return self.A.shape[0]

    @property
    def n(self) -> int:
        return self.A.shape[1]

    def to_doc(self) -> dict[str, Any]:
        doc: dict[str, Any] = {
            "kind": self.kind.value,
            "A": {
                "rows": self.m,
                "cols": self.n,
                "data": self.A.ravel().tolist(),
            },
            "y": self.y.tolist(),
            "rho_obj": self.rho_obj,
        }
        if self.name:
            doc["name"] = self.name
        return doc

    @classmethod
    def from_doc(cls, doc: dict[str, Any]) -> "ProblemSpec":
        a = doc["A"]
        rows, cols = int(a["rows"]), int(a["cols"])
        data = np.asarray(a["data"], dtype=np.float64)
        if data.size != rows * cols:
            raise ValueError(
                f"A data has {data.size} entries, expected {rows}x{cols}"
            )
        return cls(
            kind=ProblemKind(doc["kind"]),
            A=data.reshape(rows, cols),
            y=np.asarray(doc["y"], dtype=np.float64),
            rho_obj=float(doc.get("rho_obj", 1.0)),
            name=str(doc.get("name", "")),
        )


@dataclass(frozen=True)
class ReducedSystem:
    """A compiled fixed-point system ``c = m(d), d = G c + f``.

    Attributes
    ----------
    K : int
        Total number of coordinates (``n + m`` for the built-in problems).
    G : ndarray, shape (K, K)
        Orthogonal coupling matrix (``G^T G = I``; validated by
        :meth:`validate`, not at construction).
    f : ndarray, shape (K,)
        Offset vector.
    maps : tuple of CoordinateMap
        One scalar map per coordinate.
    x_block, w_block : ndarray of int
        0-based coordinate indices of the solution block and the transformed
        block.  Together they partition ``range(K)``.
    provenance : ProblemSpec
        The source problem, kept so observations can be re-applied and
        solutions certified.
    """

    K: int
    G: np.ndarray
    f: np.ndarray
    maps: tuple[CoordinateMap, ...]
    x_block: np.ndarray
    w_block: np.ndarray
    provenance: ProblemSpec

    def __post_init__(self):
        K = int(self.K)
        G = np.asarray(self.G, dtype=np.float64)
        f = np.asarray(self.f, dtype=np.float64).reshape(-1)
        if G.shape != (K, K):
            raise ValueError(f"G must be {K}x{K}, got {G.shape}")
        if f.shape != (K,):
            raise ValueError(f"f must have length {K}, got {f.shape}")
        if not np.isfinite(G).all() or not np.isfinite(f).all():
            raise NonFiniteError("G and f must be finite")
        maps = tuple(self.maps)
        if len(maps) != K:
            raise ValueError(f"expected {K} maps, got {len(maps)}")
        xb = np.asarray(self.x_block, dtype=np.intp).reshape(-1)
        wb = np.asarray(self.w_block, dtype=np.intp).reshape(-1)
        both = np.concatenate([xb, wb])
        if not np.array_equal(np.sort(both), np.arange(K)):
            raise ValueError("x_block and w_block must partition the coordinates")
        object.__setattr__(self, "K", K)
        object.__setattr__(self, "G", _readonly(G))
        object.__setattr__(self, "f", _readonly(f))
        object.__setattr__(self, "maps", maps)
        xb = xb.copy()
        wb = wb.copy()
        xb.setflags(write=False)
        wb.setflags(write=False)
        object.__setattr__(self, "x_block", xb)
        object.__setattr__(self, "w_block", wb)

    @cached_property
    def table(self) -> MapTable:
        return MapTable(self.maps)

    def apply_maps(self, d: np.ndarray, out: np.ndarray | None = None) -> np.ndarray:
        """Vectorized ``m(d)``."""
        return self.table(np.asarray(d, dtype=np.float64), out=out)

    def validate(self, tol: float = 1e-9) -> None:
        """Check orthogonality of G and nonexpansiveness prerequisites.

        Raises
        ------
        ValueError
            If ``max|G^T G - I| > tol``.
        """
        err = np.abs(self.G.T @ self.G - np.eye(self.K)).max()
        if err > tol:
            raise ValueError(f"G is not orthogonal: max|G^T G - I| = {err:.3e}")

    def to_doc(self) -> dict[str, Any]:
        """JSON-ready dict.  Block indices are serialized 1-based."""
        return {
            "K": self.K,
            "G": self.G.ravel().tolist(),
            "f": self.f.tolist(),
            "maps": [m.to_doc() for m in self.maps],
            "x_block": (self.x_block + 1).tolist(),
            "w_block": (self.w_block + 1).tolist(),
            "provenance": self.provenance.to_doc(),
        }

    @classmethod
    def from_doc(cls, doc: dict[str, Any], validate: bool = False) -> "ReducedSystem":
        K = int(doc["K"])
        G = np.asarray(doc["G"], dtype=np.float64)
        if G.size != K * K:
            raise ValueError(f"G data has {G.size} entries, expected {K}x{K}")
        system = cls(
            K=K,
            G=G.reshape(K, K),
            f=np.asarray(doc["f"], dtype=np.float64),
            maps=tuple(CoordinateMap.from_doc(m) for m in doc["maps"]),
            x_block=np.asarray(doc["x_block"], dtype=np.intp) - 1,
            w_block=np.asarray(doc["w_block"], dtype=np.intp) - 1,
            provenance=ProblemSpec.from_doc(doc["provenance"]),
        )
        if validate:
            system.validate()
        return system


_SOLVER_NAMES = ("iterative", "incremental")


@dataclass(frozen=True)
class SolverConfig:
    """Local solver settings.

    Parameters
    ----------
    solver : str
        ``iterative`` (recompute d each step) or ``incremental`` (maintain
        d alongside c with rank-1 updates).
    filtered : bool
        Whether updates are blended with weight ``rho_filter``.  With
        ``filtered=False`` the filter weight must be exactly 1.
    rho_filter : float
        Blend weight in (0, 1].
    p : float
        Per-coordinate gating probability in (0, 1].
    max_sweeps : int
        Upper bound on sweeps (one sweep is ``ceil(1/p)`` gated steps).
    epsilon : float
        Convergence threshold on the combined residual.
    seed : int
        RNG seed for gating (unsigned 64-bit).
    """

    solver: str = "incremental"
    filtered: bool = True
    rho_filter: float = 0.5
    p: float = 1.0
    max_sweeps: int = 10000
    epsilon: float = 1e-8
    seed: int = 0

    def __post_init__(self):
        if self.solver not in _SOLVER_NAMES:
            raise ValueError(f"solver must be one of {_SOLVER_NAMES}")
        if not (0.0 < self.rho_filter <= 1.0):
            raise ValueError("rho_filter must lie in (0, 1]")
        if not self.filtered and self.rho_filter != 1.0:
            raise ValueError("unfiltered runs require rho_filter == 1")
        if not (0.0 < self.p <= 1.0):
            raise ValueError("p must lie in (0, 1]")
        if self.max_sweeps < 1:
            raise ValueError("max_sweeps must be at least 1")
        if not (self.epsilon > 0.0):
            raise ValueError("epsilon must be positive")
        if not (0 <= int(self.seed) < 2**64):
            raise ValueError("seed must fit in an unsigned 64-bit integer")

    @property
    def steps_per_sweep(self) -> int:
        return math.ceil(1.0 / self.p)
