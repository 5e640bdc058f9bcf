"""swarmsolve: distributed, asynchronous fixed-point solving.

Compile LASSO, nonnegative least squares and robust decoding problems into
coordinatewise fixed-point systems, solve them locally or let a swarm of
uncoordinated workers solve them through a shared key-value store over HTTP.
"""

from .compiler import (
    CompileError,
    Readout,
    compile_problem,
    coupling_matrix,
    readout,
    residual,
    update_observation,
)
from .core import (
    CoordinateMap,
    MapKind,
    NonFiniteError,
    ProblemKind,
    ProblemSpec,
    ReducedSystem,
    SolverConfig,
    eval_m,
    eval_map,
    nonexpansive_probe,
)
from .instances import GenParams, GroundTruth, gen_instance
from .server import StoreServer
from .solvers import (
    DivergenceError,
    SolveTrace,
    StateDriftError,
    incremental_step,
    iterative_step,
    run,
    sample_index_set,
)
from .store import ProblemStore
from .verify import OracleFailure, VerifyReport, l1_oracle, verify_optimality
from .worker import StoreClient, VarSlot, Worker, WorkerConfig, WorkerPool, worker_step

__version__ = "0.1.0"

__all__ = [
    "CompileError",
    "CoordinateMap",
    "DivergenceError",
    "GenParams",
    "GroundTruth",
    "MapKind",
    "NonFiniteError",
    "OracleFailure",
    "ProblemKind",
    "ProblemSpec",
    "ProblemStore",
    "Readout",
    "ReducedSystem",
    "SolveTrace",
    "SolverConfig",
    "StateDriftError",
    "StoreClient",
    "StoreServer",
    "VarSlot",
    "VerifyReport",
    "Worker",
    "WorkerConfig",
    "WorkerPool",
    "compile_problem",
    "coupling_matrix",
    "eval_m",
    "eval_map",
    "gen_instance",
    "incremental_step",
    "iterative_step",
    "l1_oracle",
    "nonexpansive_probe",
    "readout",
    "residual",
    "run",
    "sample_index_set",
    "update_observation",
    "verify_optimality",
    "worker_step",
]
