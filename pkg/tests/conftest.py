"""Shared fixtures and independent reference implementations.

The reference code here is deliberately straight-line and dense: its
job is to be obviously correct, not fast, so the package's sparse and
compiled paths have something trustworthy to be compared against.
"""

from __future__ import annotations

import math
import os
import random

import numpy as np
import pytest

from gridrank import load_case
from gridrank.caseio import (BranchRecord, BusRecord, BusType, GenRecord,
                             RawCase)
from gridrank.netgraph import build_graph, compute_admittance
from gridrank.oracle import dense_admittance

CASE2_TEXT = """\
function mpc = case2
mpc.version = '2';
mpc.baseMVA = 100;
mpc.bus = [
\t1\t3\t0\t0\t0\t0\t1\t1.0\t0\t138\t1\t1.1\t0.9;
\t2\t1\t50\t0\t0\t0\t1\t1.0\t0\t138\t1\t1.1\t0.9;
];
mpc.gen = [
\t1\t0\t0\t999\t-999\t1.0\t100\t1\t999\t0;
];
mpc.branch = [
\t1\t2\t0\t0.1\t0\t0\t0\t0\t0\t0\t1\t-360\t360;
];
"""

CASE2_ZEROLOAD_TEXT = CASE2_TEXT.replace(
    "\t2\t1\t50\t0", "\t2\t1\t0\t0").replace(
    "function mpc = case2", "function mpc = case2_zeroload")

# closed-form solution of the 2-bus case: with the slack at 1+0j and a
# pure reactance 0.1 line feeding P=-0.5, Q=0, the load voltage solves
# e^2 - e + 0.0025 = 0 and f = -0.05
CASE2_V2 = complex((1.0 + math.sqrt(0.99)) / 2.0, -0.05)


@pytest.fixture(scope="session")
def case5():
    return load_case("case5")


@pytest.fixture(scope="session")
def case14():
    return load_case("case14")


@pytest.fixture(scope="session")
def case118():
    return load_case("case118")


@pytest.fixture(scope="session")
def graph14(case14):
    return compute_admittance(build_graph(case14))


@pytest.fixture(scope="session")
def graph118(case118):
    return compute_admittance(build_graph(case118))


@pytest.fixture
def case2_path(tmp_path):
    path = tmp_path / "case2.m"
    path.write_text(CASE2_TEXT)
    return path


@pytest.fixture(scope="session")
def warm_kernels():
    """Force numba compilation before any timed assertion runs."""
    from gridrank.pfsolver import SolverConfig, solve
    case = load_case("case5")
    graph = compute_admittance(build_graph(case))
    solve(graph, SolverConfig(max_iter=3, workers=2))
    return True


def make_synthetic_case(n: int = 50, with_loads: bool = False) -> RawCase:
    """A ring-plus-chords network: no shunts, no charging, no taps.

    Bus 1 is the slack, everything else PQ. Branch impedances vary
    deterministically so no two rows are identical.
    """
    buses = []
    for i in range(1, n + 1):
        buses.append(BusRecord(
            id=i, bus_type=BusType.SLACK if i == 1 else BusType.PQ,
            pd=(2.0 + 0.1 * i) if (with_loads and i != 1) else 0.0,
            qd=(0.5 + 0.05 * i) if (with_loads and i != 1) else 0.0,
            gs=0.0, bs=0.0, vm=1.0, va=0.0, base_kv=138.0))
    gens = (GenRecord(bus_id=1, pg=0.0, qg=0.0, vg=1.0, status=1),)
    branches = []
    for i in range(1, n + 1):
        j = i % n + 1
        branches.append(BranchRecord(
            from_bus=i, to_bus=j, r=0.01 + 0.0003 * i, x=0.05 + 0.001 * i,
            b=0.0, tap=0.0, shift=0.0, status=1))
    for i in range(1, n - 7, 5):
        branches.append(BranchRecord(
            from_bus=i, to_bus=i + 7, r=0.02 + 0.0002 * i, x=0.08 + 0.0005 * i,
            b=0.0, tap=0.0, shift=0.0, status=1))
    return RawCase(name=f"synthetic{n}", base_mva=100.0, buses=tuple(buses),
                   gens=gens, branches=tuple(branches))


def random_digraph(rng: random.Random, n_max: int = 50
                   ) -> tuple[int, list[tuple[int, int]]]:
    """Random directed graph with no dangling vertices.

    A random permutation cycle guarantees out-degree >= 1 everywhere;
    extra random edges are layered on top (parallel edges allowed).
    """
    n = rng.randint(4, n_max)
    perm = list(range(n))
    rng.shuffle(perm)
    edges = [(perm[i], perm[(i + 1) % n]) for i in range(n)]
    for _ in range(2 * n):
        s = rng.randrange(n)
        t = rng.randrange(n)
        if s != t:
            edges.append((s, t))
    return n, edges


def dense_pagerank(n: int, edges: list[tuple[int, int]], d: float,
                   tol: float = 1e-15, max_iter: int = 100000) -> np.ndarray:
    """Straight-line power iteration of the pull-form score update."""
    out_deg = np.zeros(n)
    for s, _t in edges:
        out_deg[s] += 1
    scores = np.full(n, 1.0 / n)
    for _ in range(max_iter):
        new = np.full(n, (1.0 - d) / n)
        for s, t in edges:
            new[t] += d * scores[s] / out_deg[s]
        if np.max(np.abs(new - scores)) < tol:
            return new
        scores = new
    return scores


def _start_vector(case: RawCase) -> tuple:
    """Flat-start voltages plus per-row scheduling data from raw records."""
    n = len(case.buses)
    kind = np.zeros(n, dtype=int)
    p = np.zeros(n)
    q = np.zeros(n)
    vset = np.ones(n)
    v = np.ones(n, dtype=complex)
    pg = {}
    qg = {}
    vg = {}
    for g in case.gens:
        if g.status:
            pg[g.bus_id] = pg.get(g.bus_id, 0.0) + g.pg
            qg[g.bus_id] = qg.get(g.bus_id, 0.0) + g.qg
            vg[g.bus_id] = g.vg
    for row, bus in enumerate(case.buses):
        kind[row] = int(bus.bus_type)
        p[row] = (pg.get(bus.id, 0.0) - bus.pd) / case.base_mva
        q[row] = (qg.get(bus.id, 0.0) - bus.qd) / case.base_mva
        if bus.bus_type is BusType.PQ:
            vset[row] = bus.vm
            v[row] = 1.0
        else:
            vset[row] = vg.get(bus.id, bus.vm)
            if bus.bus_type is BusType.SLACK:
                a = math.radians(bus.va)
                v[row] = vset[row] * complex(math.cos(a), math.sin(a))
            else:
                v[row] = vset[row]
    return kind, p, q, vset, v


def dense_sweep_iterates(case: RawCase, mode: str, alpha: float,
                         n_iters: int) -> list[np.ndarray]:
    """Reference damped fixed-point iterates on the dense matrix.

    mode 'jacobi': every update reads the previous iteration's vector.
    mode 'gs': updates run in ascending row order reading the partially
    updated vector. PV buses re-estimate reactive injection at the
    damped voltage and are rescaled to their setpoint magnitude.
    """
    Y, idx = dense_admittance(case)
    order = [idx[bus.id] for bus in case.buses]
    kind, p, q_sched, vset, v = _start_vector(case)
    q_pv = q_sched.copy()
    iterates = []
    for _ in range(n_iters):
        v_old = v.copy()
        src = v_old if mode == "jacobi" else v
        for i in order:
            if kind[i] == 3:
                continue
            acc = np.dot(Y[i, :], src) - Y[i, i] * src[i]
            vi = v_old[i] if mode == "jacobi" else v[i]
            q = q_pv[i] if kind[i] == 2 else q_sched[i]
            cand = (complex(p[i], -q) / np.conj(vi) - acc) / Y[i, i]
            vd = (1.0 - alpha) * vi + alpha * cand
            if kind[i] == 2:
                q_pv[i] = -(np.conj(vd) * (acc + Y[i, i] * vd)).imag
                vd = vd * (vset[i] / abs(vd))
            v[i] = vd
        iterates.append(v.copy())
    return iterates


def physical_core_count() -> int:
    """Physical cores from /proc/cpuinfo; logical count as fallback."""
    try:
        with open("/proc/cpuinfo") as fh:
            blocks = fh.read().split("\n\n")
    except OSError:
        return os.cpu_count() or 1
    cores = set()
    for blk in blocks:
        fields = {}
        for line in blk.splitlines():
            if ":" in line:
                k, val = line.split(":", 1)
                fields[k.strip()] = val.strip()
        if "processor" in fields:
            phys = fields.get("physical id", "0")
            core = fields.get("core id", fields["processor"])
            cores.add((phys, core))
    return len(cores) if cores else (os.cpu_count() or 1)
