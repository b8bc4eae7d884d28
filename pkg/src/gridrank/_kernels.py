"""Compiled inner loops for the fixed-point solver.

Both kernels are nogil so the solver can drive them from a thread pool
and actually overlap work. They are also strict IEEE code (no fastmath):
together with the fixed adjacency-order accumulation this makes results
bit-identical no matter how blocks are spread over threads.

Value encoding shared with pfsolver: kind 0 = PQ, 1 = PV, 2 = slack.
Voltage collapse (|V| < 1e-6 pu) is reported via the status return
rather than an exception so the kernel stays nopython-friendly.
"""

from __future__ import annotations

import numba
import numpy as np

COLLAPSE_LIMIT = 1e-6


@numba.njit(cache=True, nogil=True)
def sweep_block_range(b_lo, b_hi, block_ptr, order, block_of,
                      indptr, nbr, y_mut, y_self, kind,
                      p_sched, q_sched, v_set, q_pv, alpha,
                      v_old, v_new):
    """Run the two-level update for blocks [b_lo, b_hi).

    Blocks are independent: in-block neighbors are read from v_new
    (freshest value, sequential within the block), everything else from
    the v_old snapshot. Writes touch only this range's vertices and
    their q_pv slots. Returns (status, vertex, max_dv) where status 1
    flags a voltage collapse at `vertex`.
    """
    max_dv = 0.0
    for b in range(b_lo, b_hi):
        for pos in range(block_ptr[b], block_ptr[b + 1]):
            i = order[pos]
            vi = v_new[i]
            if abs(vi) < COLLAPSE_LIMIT:
                return 1, i, max_dv
            acc = 0.0 + 0.0j
            for k in range(indptr[i], indptr[i + 1]):
                j = nbr[k]
                if block_of[j] == b:
                    acc += y_mut[k] * v_new[j]
                else:
                    acc += y_mut[k] * v_old[j]
            if kind[i] == 1:
                qi = q_pv[i]
            else:
                qi = q_sched[i]
            v_cand = ((complex(p_sched[i], -qi) / np.conj(vi)) - acc) / y_self[i]
            vd = (1.0 - alpha) * vi + alpha * v_cand
            if kind[i] == 1:
                q_pv[i] = -(np.conj(vd) * (acc + y_self[i] * vd)).imag
                m = abs(vd)
                if m < COLLAPSE_LIMIT:
                    return 1, i, max_dv
                vd = vd * (v_set[i] / m)
            v_new[i] = vd
            dv = abs(vd - v_old[i])
            if dv > max_dv:
                max_dv = dv
    return 0, -1, max_dv


@numba.njit(cache=True, nogil=True)
def mismatch_range(lo, hi, indptr, nbr, y_mut, y_self, kind,
                   p_sched, q_sched, v):
    """Max |dP| over PV+PQ and max |dQ| over PQ for vertices [lo, hi)."""
    max_dp = 0.0
    max_dq = 0.0
    for i in range(lo, hi):
        if kind[i] == 2:
            continue
        cur = y_self[i] * v[i]
        for k in range(indptr[i], indptr[i + 1]):
            cur += y_mut[k] * v[nbr[k]]
        s_calc = v[i] * np.conj(cur)
        dp = abs(p_sched[i] - s_calc.real)
        if dp > max_dp:
            max_dp = dp
        if kind[i] == 0:
            dq = abs(q_sched[i] - s_calc.imag)
            if dq > max_dq:
                max_dq = dq
    return max_dp, max_dq
