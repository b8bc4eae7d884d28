"""gridrank: vertex-centric graph compute engine and AC power flow solvers.

The package has two halves that share a graph substrate:

* a small bulk-synchronous vertex-program engine (``engine``) whose
  reference workload is PageRank, and
* an AC power flow solver (``pfsolver``) that applies the same
  snapshot-isolation iteration idea to the power flow fixed point,
  organised as parallel blocks with sequential sweeps inside each block.

``oracle`` holds the independent dense reference implementations
(admittance assembly and a Newton-Raphson solver) used for validation.
"""

from .caseio import (
    BranchRecord,
    BusRecord,
    BusType,
    CaseParseError,
    CaseValidationError,
    GenRecord,
    RawCase,
    parse_matpower,
    parse_matpower_file,
    replicate_case,
    validate_case,
    write_matpower,
)
from .cases import case_path, load_case
from .engine import AdjacencyGraph, EngineConfig, VertexProgram, pagerank
from .netgraph import NetworkGraph, build_graph, compute_admittance
from .oracle import dense_admittance, diff_solutions, newton_solve
from .pfsolver import (
    Criterion,
    SolveReport,
    SolverConfig,
    branch_flows,
    power_balance,
    solve,
)

__version__ = "0.1.0"

__all__ = [
    "AdjacencyGraph",
    "BranchRecord",
    "BusRecord",
    "BusType",
    "CaseParseError",
    "CaseValidationError",
    "Criterion",
    "EngineConfig",
    "GenRecord",
    "NetworkGraph",
    "RawCase",
    "SolveReport",
    "SolverConfig",
    "VertexProgram",
    "branch_flows",
    "build_graph",
    "case_path",
    "compute_admittance",
    "dense_admittance",
    "diff_solutions",
    "load_case",
    "newton_solve",
    "pagerank",
    "parse_matpower",
    "parse_matpower_file",
    "power_balance",
    "replicate_case",
    "solve",
    "validate_case",
    "write_matpower",
]
