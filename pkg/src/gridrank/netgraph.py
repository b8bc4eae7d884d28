"""Property graph of a power network with locally computed admittance.

Buses become vertices, in-service branches become edges (parallel
branches stay distinct), and every electrical quantity is stored
per-unit on the system MVA base. Admittance lives on the graph as
attributes: each edge knows its own mutual terms and its contribution
to each endpoint's self-admittance, and each vertex aggregates the
contributions of its incident edges. Nothing here ever forms the full
matrix; the dense build in the oracle module exists precisely to
cross-check this local computation.

Branch model (series admittance y = 1/(r + jx), total charging b,
complex tap ratio t = tau * exp(j*shift)):

    y_ff = (y + j*b/2) / |t|^2      contribution to from-bus Y_ii
    y_tt =  y + j*b/2               contribution to to-bus Y_ii
    y_ft = -y / conj(t)             off-diagonal Y[from, to]
    y_tf = -y / t                   off-diagonal Y[to, from]
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field

from .caseio import BusType, RawCase, ensure_valid


class SingularBranchError(ValueError):
    """A branch with r = x = 0 has no series admittance."""


@dataclass
class BusVertex:
    id: int                 # dense internal index
    external_id: int        # bus number from the case file
    kind: BusType
    p_sched: float          # net scheduled active injection, pu
    q_sched: float          # net scheduled reactive injection, pu
    v_set: float            # magnitude setpoint, pu (meaningful for PV/Slack)
    y_shunt: complex        # bus shunt admittance, pu
    v_start: complex        # initial voltage from the case
    p_load: float = 0.0     # local demand, pu
    q_load: float = 0.0
    y_self: complex = 0j    # filled by compute_admittance


@dataclass
class BranchEdge:
    from_v: int
    to_v: int
    y_series: complex       # 0j until compute_admittance; then 1/(r+jx)
    b_charge: float
    tap: complex            # 1+0j for plain lines
    r: float
    x: float
    y_ft: complex = 0j
    y_tf: complex = 0j
    y_ff_contrib: complex = 0j
    y_tt_contrib: complex = 0j


@dataclass
class NetworkGraph:
    vertices: list[BusVertex]
    edges: list[BranchEdge]
    # per-vertex list of (edge index, other endpoint index, True if this
    # vertex is the from-end)
    adjacency: list[list[tuple[int, int, bool]]]
    base_mva: float
    index_of: dict[int, int] = field(default_factory=dict)  # external -> internal

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    def vertex_by_external(self, external_id: int) -> BusVertex:
        return self.vertices[self.index_of[external_id]]


def build_graph(case: RawCase) -> NetworkGraph:
    """Convert a validated case into the per-unit property graph.

    p_sched = (sum of in-service Pg - Pd) / base, likewise for q.
    PV and slack start magnitudes come from the governing generator
    setpoint (the last in-service machine at the bus wins); PQ buses
    start at the case Vm/Va.
    """
    ensure_valid(case)
    base = case.base_mva
    index_of = {bus.id: i for i, bus in enumerate(case.buses)}

    pg_sum = {bus.id: 0.0 for bus in case.buses}
    qg_sum = {bus.id: 0.0 for bus in case.buses}
    vg_of: dict[int, float] = {}
    for gen in case.gens:
        if not gen.status:
            continue
        pg_sum[gen.bus_id] += gen.pg
        qg_sum[gen.bus_id] += gen.qg
        vg_of[gen.bus_id] = gen.vg

    vertices: list[BusVertex] = []
    for i, bus in enumerate(case.buses):
        if bus.bus_type is BusType.PQ:
            v_set = bus.vm
            vm_start = bus.vm
        else:
            v_set = vg_of.get(bus.id, bus.vm)
            vm_start = v_set
        va_rad = math.radians(bus.va)
        vertices.append(BusVertex(
            id=i,
            external_id=bus.id,
            kind=bus.bus_type,
            p_sched=(pg_sum[bus.id] - bus.pd) / base,
            q_sched=(qg_sum[bus.id] - bus.qd) / base,
            v_set=v_set,
            y_shunt=complex(bus.gs, bus.bs) / base,
            v_start=cmath.rect(vm_start, va_rad),
            p_load=bus.pd / base,
            q_load=bus.qd / base,
        ))

    edges: list[BranchEdge] = []
    adjacency: list[list[tuple[int, int, bool]]] = [[] for _ in vertices]
    for br in case.branches:
        if not br.status:
            continue
        f = index_of[br.from_bus]
        t = index_of[br.to_bus]
        tau = br.tap if br.tap != 0.0 else 1.0
        tap = cmath.rect(tau, math.radians(br.shift))
        e = len(edges)
        edges.append(BranchEdge(
            from_v=f, to_v=t, y_series=0j, b_charge=br.b, tap=tap,
            r=br.r, x=br.x,
        ))
        adjacency[f].append((e, t, True))
        adjacency[t].append((e, f, False))

    return NetworkGraph(vertices=vertices, edges=edges, adjacency=adjacency,
                        base_mva=base, index_of=index_of)


def compute_admittance(graph: NetworkGraph) -> NetworkGraph:
    """Fill per-edge mutual/contribution terms and per-vertex y_self.

    Edge computations touch only their own edge (independent); the
    vertex pass reduces over incident edges. Idempotent: attributes are
    recomputed from the raw r/x/b/tap fields each call.
    """
    for e in graph.edges:
        if e.r == 0.0 and e.x == 0.0:
            fv = graph.vertices[e.from_v].external_id
            tv = graph.vertices[e.to_v].external_id
            raise SingularBranchError(
                f"branch {fv}-{tv} has r = x = 0, series admittance undefined")
        y = 1.0 / complex(e.r, e.x)
        half_charge = complex(0.0, e.b_charge / 2.0)
        tap2 = (e.tap * e.tap.conjugate()).real
        e.y_series = y
        e.y_ff_contrib = (y + half_charge) / tap2
        e.y_tt_contrib = y + half_charge
        e.y_ft = -y / e.tap.conjugate()
        e.y_tf = -y / e.tap

    for v in graph.vertices:
        acc = v.y_shunt
        for e_idx, _other, is_from in graph.adjacency[v.id]:
            e = graph.edges[e_idx]
            acc += e.y_ff_contrib if is_from else e.y_tt_contrib
        v.y_self = acc
    return graph


def mutual_admittance(graph: NetworkGraph, e_idx: int, at_from: bool) -> complex:
    """Y_ij seen from one endpoint of an edge (y_ft or y_tf)."""
    e = graph.edges[e_idx]
    return e.y_ft if at_from else e.y_tf


def row_sum_residual(graph: NetworkGraph) -> list[complex]:
    """y_self_i + sum of mutual terms toward every neighbor.

    Exactly zero for vertices touched only by plain uncharged lines and
    carrying no shunt; otherwise equal to the shunt plus the charging
    and off-nominal-tap corrections of incident branches.
    """
    out: list[complex] = []
    for v in graph.vertices:
        acc = v.y_self
        for e_idx, _other, is_from in graph.adjacency[v.id]:
            acc += mutual_admittance(graph, e_idx, is_from)
        out.append(acc)
    return out


def dump_vertex_admittance(graph: NetworkGraph) -> str:
    """CSV of per-vertex self-admittance, for diffing against the oracle."""
    lines = ["vertex_id,external_id,y_self_re,y_self_im"]
    for v in graph.vertices:
        lines.append(f"{v.id},{v.external_id},{v.y_self.real!r},{v.y_self.imag!r}")
    return "\n".join(lines) + "\n"


def dump_edge_admittance(graph: NetworkGraph) -> str:
    """CSV of per-edge mutual terms, for diffing against the oracle."""
    lines = ["edge_id,from_external,to_external,y_ft_re,y_ft_im,y_tf_re,y_tf_im"]
    for i, e in enumerate(graph.edges):
        fv = graph.vertices[e.from_v].external_id
        tv = graph.vertices[e.to_v].external_id
        lines.append(f"{i},{fv},{tv},{e.y_ft.real!r},{e.y_ft.imag!r},"
                     f"{e.y_tf.real!r},{e.y_tf.imag!r}")
    return "\n".join(lines) + "\n"
