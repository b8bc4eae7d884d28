"""Bi-level damped fixed-point AC power flow on the property graph.

The update rule per non-slack bus i is the classic per-bus voltage
fixed point

    V_cand = ((P_i - jQ_i) / conj(V_i) - sum_j Y_ij V_j) / Y_ii

blended with the previous iterate through a damping factor alpha
(default 0.85), with PV buses re-estimating their reactive injection
from the current iterate and then being rescaled to their magnitude
setpoint.

Iteration order is organized in two levels. Non-slack vertices are cut
into consecutive index blocks; within one outer iteration all blocks
advance in parallel against the previous iteration's snapshot (Jacobi
across blocks) while vertices inside a block run sequentially on
freshest values (Gauss-Seidel within a block). block_size=1 degenerates
to pure Jacobi, block_size >= n to a single sequential Gauss-Seidel
pass. Blocks never span electrical islands, so solving k disjoint
copies of a case reproduces the single-case iteration per island
exactly.

Parallel execution assigns contiguous block ranges to worker threads;
each worker writes only its own blocks' vertices and all cross-block
reads hit the snapshot buffer, so the result is bit-identical for any
thread count.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from . import _kernels
from .caseio import BusType
from .netgraph import BusVertex, NetworkGraph

_KIND_CODE = {BusType.PQ: 0, BusType.PV: 1, BusType.SLACK: 2}


class NumericCollapseError(RuntimeError):
    """A bus voltage magnitude fell below the divergence guard."""

    def __init__(self, external_id: int, magnitude: float):
        super().__init__(
            f"voltage collapsed at bus {external_id} "
            f"(|V| = {magnitude:.3e} pu < {_kernels.COLLAPSE_LIMIT} pu)")
        self.external_id = external_id
        self.magnitude = magnitude


class Criterion(str, Enum):
    VOLTAGE_DELTA = "voltage"
    POWER_MISMATCH = "mismatch"


@dataclass(frozen=True)
class SolverConfig:
    damping: float = 0.85
    tol_v: float = 3e-5
    tol_s: float = 1e-6
    criterion: Criterion = Criterion.VOLTAGE_DELTA
    block_size: int = 128
    max_iter: int = 2000
    flat_start: bool = True
    workers: int = 1

    def __post_init__(self):
        if not 0.0 < self.damping <= 1.0:
            raise ValueError(f"damping must lie in (0, 1], got {self.damping}")
        if self.block_size < 1:
            raise ValueError(f"block_size must be >= 1, got {self.block_size}")
        if self.workers < 1:
            raise ValueError(f"workers must be >= 1, got {self.workers}")
        if self.max_iter < 1:
            raise ValueError(f"max_iter must be >= 1, got {self.max_iter}")


@dataclass(frozen=True)
class LevelPartition:
    blocks: tuple[tuple[int, ...], ...]   # ascending indices within each block
    block_of: tuple[int, ...]             # per vertex; -1 marks slack

    @property
    def n_blocks(self) -> int:
        return len(self.blocks)


@dataclass
class IterationRecord:
    iteration: int
    max_dv: float
    max_dp: float
    max_dq: float
    ms: float


@dataclass
class SolverState:
    v: np.ndarray           # complex128 per vertex
    q_pv: np.ndarray        # float64 per vertex; meaningful at PV entries
    iter: int = 0
    trace: list[IterationRecord] = field(default_factory=list)


@dataclass(frozen=True)
class BranchFlow:
    from_bus: int           # external id
    to_bus: int
    p_from: float           # MW into the branch at the from end
    q_from: float           # MVAr
    p_to: float
    q_to: float
    p_loss: float           # MW dissipated in the branch
    q_loss: float


@dataclass
class SolveReport:
    converged: bool
    status: str             # converged | max_iter | diverged
    iterations: int
    elapsed_ms: float
    bus_ids: tuple[int, ...]
    final_v: np.ndarray
    mismatch_final: float
    branch_flows: list[BranchFlow]
    trace: list[IterationRecord]
    failed_bus: int | None = None

    def voltages(self) -> dict[int, complex]:
        return {b: complex(self.final_v[i]) for i, b in enumerate(self.bus_ids)}


@dataclass(frozen=True)
class PowerBalance:
    """Totals in pu; gen values are computed machine outputs."""

    gen_p: float
    gen_q: float
    load_p: float
    load_q: float
    loss_p: float
    loss_q: float
    shunt_p: float          # absorbed by bus shunts
    shunt_q: float
    residual_p: float       # gen - load - loss - shunt
    residual_q: float


@dataclass(frozen=True)
class _Packed:
    indptr: np.ndarray
    nbr: np.ndarray
    y_mut: np.ndarray
    y_self: np.ndarray
    kind: np.ndarray
    p_sched: np.ndarray
    q_sched: np.ndarray
    v_set: np.ndarray


def _pack(graph: NetworkGraph) -> _Packed:
    n = graph.n_vertices
    degree = [len(graph.adjacency[i]) for i in range(n)]
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(degree, out=indptr[1:])
    nbr = np.zeros(indptr[-1], dtype=np.int64)
    y_mut = np.zeros(indptr[-1], dtype=np.complex128)
    for i in range(n):
        base = indptr[i]
        for k, (e_idx, other, is_from) in enumerate(graph.adjacency[i]):
            e = graph.edges[e_idx]
            nbr[base + k] = other
            y_mut[base + k] = e.y_ft if is_from else e.y_tf
    y_self = np.array([v.y_self for v in graph.vertices], dtype=np.complex128)
    kind = np.array([_KIND_CODE[v.kind] for v in graph.vertices], dtype=np.int64)
    dead = np.flatnonzero((y_self == 0) & (kind != _KIND_CODE[BusType.SLACK]))
    if dead.size:
        if not y_self.any():
            raise ValueError(
                "graph admittance attributes are all zero; "
                "run compute_admittance(graph) before solving")
        bad = graph.vertices[int(dead[0])].external_id
        raise ValueError(
            f"bus {bad} has zero self-admittance, its update is undefined")
    return _Packed(
        indptr=indptr, nbr=nbr, y_mut=y_mut,
        y_self=y_self,
        kind=kind,
        p_sched=np.array([v.p_sched for v in graph.vertices]),
        q_sched=np.array([v.q_sched for v in graph.vertices]),
        v_set=np.array([v.v_set for v in graph.vertices]),
    )


def _components(graph: NetworkGraph) -> list[list[int]]:
    """Connected components over in-service edges, each ascending,
    ordered by smallest member."""
    n = graph.n_vertices
    seen = [False] * n
    comps: list[list[int]] = []
    for start in range(n):
        if seen[start]:
            continue
        stack = [start]
        seen[start] = True
        comp = []
        while stack:
            u = stack.pop()
            comp.append(u)
            for _e, other, _d in graph.adjacency[u]:
                if not seen[other]:
                    seen[other] = True
                    stack.append(other)
        comps.append(sorted(comp))
    return comps


def partition_levels(graph: NetworkGraph, block_size: int) -> LevelPartition:
    """Cut non-slack vertices into consecutive blocks of at most
    block_size.

    Cuts are made independently inside each electrical island so a
    block never mixes islands; on a connected graph this is simply
    ceil(n/block_size) consecutive runs in ascending index order. Slack
    vertices belong to no block.
    """
    if block_size < 1:
        raise ValueError(f"block_size must be >= 1, got {block_size}")
    blocks: list[tuple[int, ...]] = []
    block_of = [-1] * graph.n_vertices
    for comp in _components(graph):
        members = [i for i in comp if graph.vertices[i].kind is not BusType.SLACK]
        for lo in range(0, len(members), block_size):
            chunk = members[lo:lo + block_size]
            for i in chunk:
                block_of[i] = len(blocks)
            blocks.append(tuple(chunk))
    return LevelPartition(blocks=tuple(blocks), block_of=tuple(block_of))


def init_state(graph: NetworkGraph, config: SolverConfig) -> SolverState:
    """Initial voltages and PV reactive injections.

    Flat start: PQ at 1.0 with zero angle, PV at setpoint magnitude and
    zero angle; otherwise the case Vm/Va columns. The slack always sits
    at its setpoint magnitude and case angle. q_pv starts at the
    scheduled reactive injection.
    """
    n = graph.n_vertices
    v = np.zeros(n, dtype=np.complex128)
    for vertex in graph.vertices:
        if vertex.kind is BusType.SLACK:
            angle = math.atan2(vertex.v_start.imag, vertex.v_start.real)
            v[vertex.id] = vertex.v_set * complex(math.cos(angle), math.sin(angle))
        elif config.flat_start:
            v[vertex.id] = 1.0 if vertex.kind is BusType.PQ else vertex.v_set
        else:
            if vertex.kind is BusType.PV:
                mag = abs(vertex.v_start)
                v[vertex.id] = vertex.v_start * (vertex.v_set / mag)
            else:
                v[vertex.id] = vertex.v_start
    q_pv = np.array([vert.q_sched for vert in graph.vertices])
    return SolverState(v=v, q_pv=q_pv)


def _neighbor_sum(graph: NetworkGraph, vertex: BusVertex,
                  neighbor_voltages: dict[int, complex]) -> complex:
    acc = 0j
    for e_idx, other, is_from in graph.adjacency[vertex.id]:
        e = graph.edges[e_idx]
        y = e.y_ft if is_from else e.y_tf
        acc += y * neighbor_voltages[other]
    return acc


def gs_update_bus(graph: NetworkGraph, vertex: BusVertex,
                  neighbor_voltages: dict[int, complex],
                  state: SolverState) -> complex:
    """Candidate voltage for one non-slack vertex.

    Reference formula, identical to the compiled sweep: PQ buses use
    their scheduled reactive injection, PV buses the tracking q_pv.
    """
    if vertex.kind is BusType.SLACK:
        raise ValueError(f"bus {vertex.external_id} is the slack; it never updates")
    vi = complex(state.v[vertex.id])
    if abs(vi) < _kernels.COLLAPSE_LIMIT:
        raise NumericCollapseError(vertex.external_id, abs(vi))
    q = state.q_pv[vertex.id] if vertex.kind is BusType.PV else vertex.q_sched
    acc = _neighbor_sum(graph, vertex, neighbor_voltages)
    return (complex(vertex.p_sched, -q) / vi.conjugate() - acc) / vertex.y_self


def apply_damping(v_old: complex, v_cand: complex, alpha: float) -> complex:
    """Convex blend (1-alpha)*old + alpha*candidate."""
    if not 0.0 < alpha <= 1.0:
        raise ValueError(f"damping must lie in (0, 1], got {alpha}")
    return (1.0 - alpha) * v_old + alpha * v_cand


def pv_adjust(graph: NetworkGraph, vertex: BusVertex,
              neighbor_voltages: dict[int, complex],
              state: SolverState, v_damped: complex) -> tuple[float, complex]:
    """Update the PV bus reactive estimate and pin the magnitude.

    q_pv becomes the reactive injection computed at the damped voltage
    (self term included); the returned voltage keeps the damped angle
    at magnitude v_set.
    """
    if vertex.kind is not BusType.PV:
        raise ValueError(f"bus {vertex.external_id} is not PV")
    acc = _neighbor_sum(graph, vertex, neighbor_voltages)
    q_new = -(v_damped.conjugate() * (acc + vertex.y_self * v_damped)).imag
    mag = abs(v_damped)
    if mag < _kernels.COLLAPSE_LIMIT:
        raise NumericCollapseError(vertex.external_id, mag)
    return q_new, v_damped * (vertex.v_set / mag)


def compute_mismatch(graph: NetworkGraph, vertex: BusVertex,
                     neighbor_voltages: dict[int, complex],
                     v_self: complex) -> tuple[float, float]:
    """(dP, dQ) at one vertex; PV reports dQ = 0, slack reports (0, 0)."""
    if vertex.kind is BusType.SLACK:
        return 0.0, 0.0
    current = _neighbor_sum(graph, vertex, neighbor_voltages) + vertex.y_self * v_self
    s_calc = v_self * current.conjugate()
    dp = vertex.p_sched - s_calc.real
    dq = vertex.q_sched - s_calc.imag if vertex.kind is BusType.PQ else 0.0
    return dp, dq


def _partition_arrays(partition: LevelPartition
                      ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    order = np.array([i for block in partition.blocks for i in block],
                     dtype=np.int64)
    block_ptr = np.zeros(len(partition.blocks) + 1, dtype=np.int64)
    np.cumsum([len(b) for b in partition.blocks], out=block_ptr[1:])
    block_of = np.array(partition.block_of, dtype=np.int64)
    return order, block_ptr, block_of


def _sweep_once(packed: _Packed, order, block_ptr, block_of,
                state: SolverState, config: SolverConfig,
                pool: ThreadPoolExecutor | None) -> tuple[np.ndarray, float, int]:
    """One outer iteration. Returns (v_new, max_dv, collapsed_vertex)."""
    v_old = state.v
    v_new = v_old.copy()
    n_blocks = len(block_ptr) - 1
    args = (block_ptr, order, block_of, packed.indptr, packed.nbr,
            packed.y_mut, packed.y_self, packed.kind, packed.p_sched,
            packed.q_sched, packed.v_set, state.q_pv, config.damping,
            v_old, v_new)
    if pool is None or n_blocks == 1:
        status, bad, max_dv = _kernels.sweep_block_range(0, n_blocks, *args)
        return v_new, max_dv, (bad if status else -1)
    workers = min(config.workers, n_blocks)
    bounds = [round(w * n_blocks / workers) for w in range(workers + 1)]
    futures = [pool.submit(_kernels.sweep_block_range, bounds[w], bounds[w + 1], *args)
               for w in range(workers)]
    max_dv = 0.0
    collapsed = -1
    for fut in futures:
        status, bad, dv = fut.result()
        max_dv = max(max_dv, dv)
        if status and collapsed < 0:
            collapsed = bad
    return v_new, max_dv, collapsed


def _mismatch_pass(packed: _Packed, v: np.ndarray, workers: int,
                   pool: ThreadPoolExecutor | None) -> tuple[float, float]:
    n = len(v)
    args = (packed.indptr, packed.nbr, packed.y_mut, packed.y_self,
            packed.kind, packed.p_sched, packed.q_sched, v)
    if pool is None:
        return _kernels.mismatch_range(0, n, *args)
    bounds = [round(w * n / workers) for w in range(workers + 1)]
    futures = [pool.submit(_kernels.mismatch_range, bounds[w], bounds[w + 1], *args)
               for w in range(workers)]
    max_dp = max_dq = 0.0
    for fut in futures:
        dp, dq = fut.result()
        max_dp = max(max_dp, dp)
        max_dq = max(max_dq, dq)
    return max_dp, max_dq


def bilevel_sweep(graph: NetworkGraph, partition: LevelPartition,
                  state: SolverState, config: SolverConfig) -> SolverState:
    """Run exactly one outer iteration in place and return the state.

    Raises NumericCollapseError on voltage collapse. Mainly useful for
    stepwise inspection; solve() drives the same kernel in a loop.
    """
    packed = _pack(graph)
    order, block_ptr, block_of = _partition_arrays(partition)
    v_new, _max_dv, collapsed = _sweep_once(packed, order, block_ptr, block_of,
                                            state, config, pool=None)
    if collapsed >= 0:
        ext = graph.vertices[collapsed].external_id
        raise NumericCollapseError(ext, abs(complex(v_new[collapsed])))
    state.v = v_new
    state.iter += 1
    return state


def solve(graph: NetworkGraph, config: SolverConfig | None = None) -> SolveReport:
    """Iterate bi-level sweeps until the governing criterion holds.

    The stop test runs after every sweep: VoltageDelta compares the max
    per-bus voltage change against tol_v, PowerMismatch the max |dP|,
    |dQ| against tol_s. Non-convergence and voltage collapse produce a
    report (status max_iter / diverged), not an exception.
    """
    config = config or SolverConfig()
    packed = _pack(graph)
    partition = partition_levels(graph, config.block_size)
    order, block_ptr, block_of = _partition_arrays(partition)
    state = init_state(graph, config)
    bus_ids = tuple(v.external_id for v in graph.vertices)

    pool = None
    if config.workers > 1:
        pool = ThreadPoolExecutor(max_workers=config.workers,
                                  thread_name_prefix="sweep")
    status = "max_iter"
    failed_bus = None
    max_dp = max_dq = float("inf")
    t_start = time.perf_counter()
    try:
        for it in range(1, config.max_iter + 1):
            t0 = time.perf_counter()
            v_new, max_dv, collapsed = _sweep_once(
                packed, order, block_ptr, block_of, state, config, pool)
            if collapsed >= 0:
                state.v = v_new
                state.iter = it
                status = "diverged"
                failed_bus = graph.vertices[collapsed].external_id
                break
            max_dp, max_dq = _mismatch_pass(packed, v_new, config.workers, pool)
            state.v = v_new
            state.iter = it
            state.trace.append(IterationRecord(
                iteration=it, max_dv=float(max_dv), max_dp=float(max_dp),
                max_dq=float(max_dq), ms=(time.perf_counter() - t0) * 1e3))
            if config.criterion is Criterion.VOLTAGE_DELTA:
                done = max_dv < config.tol_v
            else:
                done = max(max_dp, max_dq) < config.tol_s
            if done:
                status = "converged"
                break
    finally:
        if pool is not None:
            pool.shutdown(wait=True)
    elapsed_ms = (time.perf_counter() - t_start) * 1e3

    if status == "diverged":
        mismatch_final = float("inf")
        flows: list[BranchFlow] = []
    else:
        mismatch_final = float(max(max_dp, max_dq))
        flows = branch_flows(graph, state.v)
    return SolveReport(
        converged=(status == "converged"), status=status,
        iterations=state.iter, elapsed_ms=elapsed_ms, bus_ids=bus_ids,
        final_v=state.v, mismatch_final=mismatch_final,
        branch_flows=flows, trace=state.trace, failed_bus=failed_bus)


def branch_flows(graph: NetworkGraph, v: np.ndarray) -> list[BranchFlow]:
    """Per-branch power flows in MW/MVAr at a voltage profile."""
    base = graph.base_mva
    flows = []
    for e in graph.edges:
        vf = complex(v[e.from_v])
        vt = complex(v[e.to_v])
        s_from = vf * (e.y_ff_contrib * vf + e.y_ft * vt).conjugate() * base
        s_to = vt * (e.y_tt_contrib * vt + e.y_tf * vf).conjugate() * base
        loss = s_from + s_to
        flows.append(BranchFlow(
            from_bus=graph.vertices[e.from_v].external_id,
            to_bus=graph.vertices[e.to_v].external_id,
            p_from=s_from.real, q_from=s_from.imag,
            p_to=s_to.real, q_to=s_to.imag,
            p_loss=loss.real, q_loss=loss.imag))
    return flows


def power_balance(graph: NetworkGraph, v: np.ndarray) -> PowerBalance:
    """Generation / load / loss / shunt accounting at a voltage profile.

    Generation is the computed machine output per bus (network injection
    plus local load), so the residual checks that the branch-flow and
    shunt formulas are consistent with the nodal injections; it is tiny
    at any profile, converged or not.
    """
    gen = 0j
    load = 0j
    shunt = 0j
    for vertex in graph.vertices:
        vi = complex(v[vertex.id])
        current = vertex.y_self * vi
        for e_idx, other, is_from in graph.adjacency[vertex.id]:
            e = graph.edges[e_idx]
            y = e.y_ft if is_from else e.y_tf
            current += y * complex(v[other])
        s_inj = vi * current.conjugate()
        s_load = complex(vertex.p_load, vertex.q_load)
        gen += s_inj + s_load
        load += s_load
        shunt += abs(vi) ** 2 * vertex.y_shunt.conjugate()
    loss = 0j
    for f in branch_flows(graph, v):
        loss += complex(f.p_loss, f.q_loss) / graph.base_mva
    residual = gen - load - loss - shunt
    return PowerBalance(
        gen_p=gen.real, gen_q=gen.imag, load_p=load.real, load_q=load.imag,
        loss_p=loss.real, loss_q=loss.imag, shunt_p=shunt.real,
        shunt_q=shunt.imag, residual_p=residual.real, residual_q=residual.imag)
