"""Bulk-synchronous vertex-program engine with a thread worker pool.

A VertexProgram is run in supersteps. Within a superstep every active
vertex folds its incident edges over an accumulator (edge phase), then
turns the accumulator into its next value (vertex phase). All reads see
the values from before the superstep; writes land in a separate buffer
that becomes visible only at the barrier. That snapshot isolation is
what makes the result independent of scheduling, and with the default
fixed-order accumulation the result is bit-identical for any worker
count.

Vertices are partitioned into contiguous index ranges, one per worker.
Workloads here are uniform enough that static partitioning is fine.

The module ships PageRank as the reference program: the pull
formulation PR(i) = (1-d)/N + d * sum over in-neighbors j of
PR(j)/outdeg(j), with dangling vertices contributing nothing.
"""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence


class EngineNonConvergence(RuntimeError):
    """run_until hit max_supersteps; carries the last metric seen."""

    def __init__(self, supersteps: int, last_metric: float):
        super().__init__(
            f"no convergence after {supersteps} supersteps "
            f"(last metric {last_metric:.3e})")
        self.supersteps = supersteps
        self.last_metric = last_metric


class SuperstepTimeoutError(RuntimeError):
    """A single superstep exceeded the configured wall-time budget."""


@dataclass(frozen=True)
class VertexProgram:
    """One vertex-centric computation.

    edge_phase(vertex_value, edge, neighbor_value, acc) -> acc folds one
    incident edge; it must be commutative-associative in the accumulator
    so that edge order only matters up to float reassociation.
    vertex_phase(vertex_value, acc) -> (new_value, changed).
    metric, when given, maps (old_values, new_values) to a float the
    stop predicate can use (e.g. max |delta|).
    """

    edge_phase: Callable
    vertex_phase: Callable
    accumulator_identity: object = None
    metric: Callable | None = None


@dataclass(frozen=True)
class EngineConfig:
    workers: int = 1
    max_supersteps: int = 1000
    deterministic_reduction: bool = True
    superstep_timeout: float | None = None  # seconds of wall time

    def __post_init__(self):
        if self.workers < 1:
            raise ValueError(f"workers must be >= 1, got {self.workers}")
        if self.max_supersteps < 1:
            raise ValueError(
                f"max_supersteps must be >= 1, got {self.max_supersteps}")


@dataclass(frozen=True)
class TraceEntry:
    superstep: int
    changed_count: int
    metric: float
    wall_seconds: float


@dataclass
class AdjacencyGraph:
    """Directed graph stored as per-vertex in-edge lists.

    incidence(v) yields (neighbor index, edge payload) pairs; for graphs
    built by from_directed_edges the payload is the neighbor's
    out-degree, which is exactly what PageRank needs.
    """

    n_vertices: int
    in_edges: list[list[tuple[int, object]]]
    out_degree: list[int] = field(default_factory=list)

    def incidence(self, v: int) -> list[tuple[int, object]]:
        return self.in_edges[v]

    @classmethod
    def from_directed_edges(cls, n: int, edges: Sequence[tuple[int, int]]
                            ) -> "AdjacencyGraph":
        out_degree = [0] * n
        for src, _dst in edges:
            out_degree[src] += 1
        in_edges: list[list[tuple[int, object]]] = [[] for _ in range(n)]
        for src, dst in edges:
            in_edges[dst].append((src, out_degree[src]))
        return cls(n_vertices=n, in_edges=in_edges, out_degree=out_degree)

    @classmethod
    def from_undirected_edges(cls, n: int, edges: Sequence[tuple[int, int]]
                              ) -> "AdjacencyGraph":
        directed = [(a, b) for a, b in edges] + [(b, a) for a, b in edges]
        return cls.from_directed_edges(n, directed)


def _incidence_fn(graph) -> Callable[[int], Sequence[tuple[int, object]]]:
    """Adapt a graph to (vertex -> [(neighbor, edge payload)])."""
    if hasattr(graph, "incidence"):
        return graph.incidence
    if hasattr(graph, "adjacency"):
        # power-network graph: payload is (edge object, is_from flag)
        adjacency = graph.adjacency
        edges = graph.edges

        def incidence(v: int) -> list[tuple[int, object]]:
            return [(other, (edges[e], is_from))
                    for e, other, is_from in adjacency[v]]
        return incidence
    raise TypeError(
        f"{type(graph).__name__} exposes neither incidence() nor adjacency")


def _update_range(indices, lo: int, hi: int, incidence, program,
                  values, new_values, deadline: float | None) -> set[int]:
    changed: set[int] = set()
    for pos in range(lo, hi):
        if deadline is not None and pos % 512 == 0 and time.perf_counter() > deadline:
            raise SuperstepTimeoutError("superstep wall-time budget exceeded")
        v = indices[pos]
        snapshot = values[v]
        acc = program.accumulator_identity
        for other, payload in incidence(v):
            acc = program.edge_phase(snapshot, payload, values[other], acc)
        new_value, did_change = program.vertex_phase(snapshot, acc)
        new_values[v] = new_value
        if did_change:
            changed.add(v)
    return changed


def run_superstep(graph, program: VertexProgram, values: Sequence,
                  active: Sequence[int] | None = None,
                  config: EngineConfig | None = None) -> tuple[list, set[int]]:
    """Run one barrier-synchronized superstep.

    Every active vertex reads only the pre-superstep snapshot in
    `values`; the returned list carries the post-barrier state (inactive
    vertices keep their old value). Also returns the set of vertices
    whose vertex_phase reported a change.
    """
    config = config or EngineConfig()
    incidence = _incidence_fn(graph)
    n = len(values)
    indices = list(range(n)) if active is None else sorted(active)
    if not indices:
        raise ValueError("active vertex selection is empty")
    new_values = list(values)

    deadline = None
    if config.superstep_timeout is not None:
        deadline = time.perf_counter() + config.superstep_timeout

    workers = min(config.workers, len(indices))
    if workers == 1:
        changed = _update_range(indices, 0, len(indices), incidence, program,
                                values, new_values, deadline)
        return new_values, changed

    # contiguous ranges; each worker writes only its own vertices' slots
    bounds = [round(i * len(indices) / workers) for i in range(workers + 1)]
    changed = set()
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = [
            pool.submit(_update_range, indices, bounds[w], bounds[w + 1],
                        incidence, program, values, new_values, deadline)
            for w in range(workers)
        ]
        for fut in futures:
            changed |= fut.result()
    return new_values, changed


def run_until(graph, program: VertexProgram,
              stop: Callable[[int, set[int], float], bool],
              values: Sequence,
              config: EngineConfig | None = None,
              trace: list[TraceEntry] | None = None) -> tuple[int, list]:
    """Iterate supersteps until the stop predicate holds.

    stop(superstep_index, changed_set, metric) runs single-threaded
    between barriers; superstep_index starts at 1. Returns (supersteps
    executed, final values). Raises EngineNonConvergence if
    max_supersteps pass without stop turning true.
    """
    config = config or EngineConfig()
    current = list(values)
    metric = float("inf")
    for step in range(1, config.max_supersteps + 1):
        t0 = time.perf_counter()
        new_values, changed = run_superstep(graph, program, current,
                                            active=None, config=config)
        wall = time.perf_counter() - t0
        if program.metric is not None:
            metric = float(program.metric(current, new_values))
        else:
            metric = float(len(changed))
        current = new_values
        if trace is not None:
            trace.append(TraceEntry(step, len(changed), metric, wall))
        if stop(step, changed, metric):
            return step, current
    raise EngineNonConvergence(config.max_supersteps, metric)


@dataclass
class PageRankState:
    """Final scores plus the bookkeeping of the run that produced them."""

    scores: list[float]
    damping: float
    n: int
    out_degree: list[int]
    supersteps: int = 0
    trace: list[TraceEntry] = field(default_factory=list)


def pagerank_program(n: int, d: float) -> VertexProgram:
    """The pull-style PageRank vertex program for AdjacencyGraph."""
    base = (1.0 - d) / n

    def edge_phase(_snapshot, out_deg, neighbor_score, acc):
        return acc + neighbor_score / out_deg

    def vertex_phase(old_score, acc):
        new_score = base + d * acc
        return new_score, new_score != old_score

    def metric(old_values, new_values):
        return max(abs(a - b) for a, b in zip(old_values, new_values))

    return VertexProgram(edge_phase=edge_phase, vertex_phase=vertex_phase,
                         accumulator_identity=0.0, metric=metric)


def pagerank(graph: AdjacencyGraph, d: float = 0.85, tol: float = 1e-10,
             max_iter: int = 1000,
             config: EngineConfig | None = None) -> PageRankState:
    """PageRank by BSP power iteration from a uniform 1/N start.

    Every vertex is updated each superstep from previous-superstep
    scores only. Vertices without out-edges contribute to no sums, so
    their mass leaks (no redistribution term). Converges when the max
    per-vertex score change drops below tol.
    """
    if not 0.0 < d < 1.0:
        raise ValueError(f"damping must lie in (0, 1), got {d}")
    n = graph.n_vertices
    if n == 0:
        raise ValueError("graph has no vertices")
    base_config = config or EngineConfig()
    config = EngineConfig(workers=base_config.workers,
                          max_supersteps=max_iter,
                          deterministic_reduction=base_config.deterministic_reduction,
                          superstep_timeout=base_config.superstep_timeout)
    program = pagerank_program(n, d)
    start = [1.0 / n] * n
    trace: list[TraceEntry] = []
    steps, final = run_until(
        graph, program,
        stop=lambda _step, _changed, metric: metric < tol,
        values=start, config=config, trace=trace)
    return PageRankState(scores=final, damping=d, n=n,
                         out_degree=list(graph.out_degree),
                         supersteps=steps, trace=trace)
