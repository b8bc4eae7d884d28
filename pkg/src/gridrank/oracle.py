"""Dense Newton-Raphson power flow reference and solution diffing.

Everything here is deliberately independent of the graph modules: the
admittance matrix is assembled matrix-wise with vectorized numpy (no
shared code with netgraph's per-edge computation), and the solver is a
plain textbook polar Newton-Raphson with a dense Jacobian. It exists to
give the fixed-point solver something trustworthy to be measured
against, so it favors clarity over speed and only targets desk-scale
cases.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .caseio import BusType, RawCase, ensure_valid
from .netgraph import SingularBranchError


@dataclass(frozen=True)
class DenseSolution:
    """Converged (or abandoned) Newton state for one case."""

    bus_ids: tuple[int, ...]
    v: np.ndarray               # complex voltage per bus, case order
    iterations: int
    max_mismatch: float         # infinity norm of the final residual, pu
    converged: bool
    q_gen: dict[int, float]     # reactive output of PV-bus machines, pu
    p_slack: float              # slack machine active output, pu
    q_slack: float              # slack machine reactive output, pu

    def voltages(self) -> dict[int, complex]:
        return {b: complex(self.v[i]) for i, b in enumerate(self.bus_ids)}


@dataclass(frozen=True)
class SolutionDiff:
    max_angle_diff: float       # radians, wrapped to (-pi, pi]
    max_mag_diff: float         # pu
    argmax_bus_angle: int
    argmax_bus_mag: int


def dense_admittance(case: RawCase) -> tuple[np.ndarray, dict[int, int]]:
    """Full bus admittance matrix, assembled vectorized.

    Returns (Y, index map from external bus id to matrix row). Only
    in-service branches contribute. Raises SingularBranchError for an
    in-service branch with r = x = 0.
    """
    n = len(case.buses)
    idx = {bus.id: i for i, bus in enumerate(case.buses)}

    live = [br for br in case.branches if br.status]
    for br in live:
        if br.r == 0.0 and br.x == 0.0:
            raise SingularBranchError(
                f"branch {br.from_bus}-{br.to_bus} has r = x = 0, "
                f"series admittance undefined")

    f = np.array([idx[br.from_bus] for br in live], dtype=np.intp)
    t = np.array([idx[br.to_bus] for br in live], dtype=np.intp)
    ys = 1.0 / np.array([complex(br.r, br.x) for br in live])
    bc = np.array([br.b for br in live])
    ratio = np.array([br.tap if br.tap != 0.0 else 1.0 for br in live])
    shift = np.radians(np.array([br.shift for br in live]))
    tap = ratio * np.exp(1j * shift)

    ytt = ys + 0.5j * bc
    yff = ytt / (tap * np.conj(tap))
    yft = -ys / np.conj(tap)
    ytf = -ys / tap

    y = np.zeros((n, n), dtype=complex)
    np.add.at(y, (f, f), yff)
    np.add.at(y, (f, t), yft)
    np.add.at(y, (t, f), ytf)
    np.add.at(y, (t, t), ytt)

    gs = np.array([bus.gs for bus in case.buses])
    bs = np.array([bus.bs for bus in case.buses])
    y[np.arange(n), np.arange(n)] += (gs + 1j * bs) / case.base_mva
    return y, idx


def _scheduled_injections(case: RawCase) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(S_sched, v_set, kind) arrays in case bus order, pu."""
    n = len(case.buses)
    idx = {bus.id: i for i, bus in enumerate(case.buses)}
    pg = np.zeros(n)
    qg = np.zeros(n)
    vset = np.array([bus.vm for bus in case.buses])
    for gen in case.gens:
        if not gen.status:
            continue
        i = idx[gen.bus_id]
        pg[i] += gen.pg
        qg[i] += gen.qg
        vset[i] = gen.vg
    pd = np.array([bus.pd for bus in case.buses])
    qd = np.array([bus.qd for bus in case.buses])
    s_sched = ((pg - pd) + 1j * (qg - qd)) / case.base_mva
    kind = np.array([int(bus.bus_type) for bus in case.buses])
    return s_sched, vset, kind


def newton_solve(case: RawCase, tol: float = 1e-8, max_iter: int = 20,
                 flat_start: bool = True) -> DenseSolution:
    """Polar Newton-Raphson with a full dense Jacobian.

    Residual F stacks active mismatch at PV+PQ buses over reactive
    mismatch at PQ buses; convergence is max|F| < tol. With flat_start,
    non-slack angles start at zero and PQ magnitudes at 1.0 (setpoints
    still apply at PV/slack buses); otherwise the case Vm/Va columns
    seed the iteration. A singular Jacobian or hitting max_iter yields
    converged=False.
    """
    ensure_valid(case)
    y, idx = dense_admittance(case)
    s_sched, vset, kind = _scheduled_injections(case)
    n = len(case.buses)
    bus_ids = tuple(bus.id for bus in case.buses)

    pq = np.flatnonzero(kind == int(BusType.PQ))
    pv = np.flatnonzero(kind == int(BusType.PV))
    slack = np.flatnonzero(kind == int(BusType.SLACK))
    pvpq = np.concatenate([pv, pq])

    vm = np.array([bus.vm for bus in case.buses], dtype=float)
    va = np.radians(np.array([bus.va for bus in case.buses], dtype=float))
    if flat_start:
        va = np.where(kind == int(BusType.SLACK), va, 0.0)
        vm = np.ones(n)
    vm[pv] = vset[pv]
    vm[slack] = vset[slack]
    v = vm * np.exp(1j * va)

    def residual(volt: np.ndarray) -> np.ndarray:
        mis = volt * np.conj(y @ volt) - s_sched
        return np.concatenate([mis[pvpq].real, mis[pq].imag])

    fval = residual(v)
    iterations = 0
    converged = bool(np.max(np.abs(fval), initial=0.0) < tol)
    npv, npq = len(pv), len(pq)

    while not converged and iterations < max_iter:
        diag_v = np.diag(v)
        diag_i = np.diag(y @ v)
        diag_vnorm = np.diag(v / np.abs(v))
        ds_dva = 1j * diag_v @ np.conj(diag_i - y @ diag_v)
        ds_dvm = diag_v @ np.conj(y @ diag_vnorm) + np.conj(diag_i) @ diag_vnorm

        j11 = ds_dva[np.ix_(pvpq, pvpq)].real
        j12 = ds_dvm[np.ix_(pvpq, pq)].real
        j21 = ds_dva[np.ix_(pq, pvpq)].imag
        j22 = ds_dvm[np.ix_(pq, pq)].imag
        jac = np.block([[j11, j12], [j21, j22]])

        try:
            dx = np.linalg.solve(jac, -fval)
        except np.linalg.LinAlgError:
            break
        va[pvpq] += dx[: npv + npq]
        vm[pq] += dx[npv + npq:]
        v = vm * np.exp(1j * va)
        iterations += 1
        fval = residual(v)
        converged = bool(np.max(np.abs(fval)) < tol)

    s_inj = v * np.conj(y @ v)
    qd = np.array([bus.qd for bus in case.buses]) / case.base_mva
    pd = np.array([bus.pd for bus in case.buses]) / case.base_mva
    q_gen = {bus_ids[i]: float(s_inj[i].imag + qd[i]) for i in pv}
    si = int(slack[0])
    return DenseSolution(
        bus_ids=bus_ids, v=v, iterations=iterations,
        max_mismatch=float(np.max(np.abs(fval), initial=0.0)),
        converged=converged, q_gen=q_gen,
        p_slack=float(s_inj[si].real + pd[si]),
        q_slack=float(s_inj[si].imag + qd[si]),
    )


def _as_profile(profile) -> dict[int, complex]:
    if isinstance(profile, dict):
        return profile
    if hasattr(profile, "voltages"):
        volts = profile.voltages
        return volts() if callable(volts) else volts
    raise TypeError(f"cannot read a voltage profile from {type(profile).__name__}")


def diff_solutions(a, b) -> SolutionDiff:
    """Worst-case per-bus angle and magnitude disagreement.

    Accepts anything with a voltages() mapping (DenseSolution, solver
    reports) or a plain {bus_id: complex} dict. Angle differences are
    wrapped to (-pi, pi]. Symmetric in its arguments.
    """
    va = _as_profile(a)
    vb = _as_profile(b)
    if va.keys() != vb.keys():
        only_a = sorted(va.keys() - vb.keys())[:3]
        only_b = sorted(vb.keys() - va.keys())[:3]
        raise ValueError(
            f"profiles cover different bus sets (only in first: {only_a}, "
            f"only in second: {only_b})")
    max_ang, max_mag = 0.0, 0.0
    arg_ang = arg_mag = next(iter(va))
    for bus in va:
        ang = abs(np.angle(va[bus] * np.conj(vb[bus])))
        mag = abs(abs(va[bus]) - abs(vb[bus]))
        if ang > max_ang:
            max_ang, arg_ang = ang, bus
        if mag > max_mag:
            max_mag, arg_mag = mag, bus
    return SolutionDiff(max_angle_diff=float(max_ang), max_mag_diff=float(max_mag),
                        argmax_bus_angle=arg_ang, argmax_bus_mag=arg_mag)
