"""Plain-text and CSV serialization for solver outputs.

Three file shapes, all line-oriented and diff-friendly:

* results file: header comments, one ``bus`` line per vertex
  (id, |V| pu, angle deg) and one ``branch`` line per edge
  (from, to, P_from, Q_from, P_to, Q_to in MW/MVAr);
* trace CSV: ``iter,max_dv,max_dp,max_dq,ms``;
* bench CSV: ``threads,ms,iterations``.
"""

from __future__ import annotations

import csv
import io
import math

from .pfsolver import IterationRecord, SolveReport


def format_results(report: SolveReport, case_name: str = "") -> str:
    out = io.StringIO()
    out.write(f"# case: {case_name}\n" if case_name else "")
    out.write(f"# status: {report.status}\n")
    out.write(f"# iterations: {report.iterations}\n")
    out.write(f"# elapsed_ms: {report.elapsed_ms:.3f}\n")
    out.write(f"# final_mismatch_pu: {report.mismatch_final:.6e}\n")
    for i, bus in enumerate(report.bus_ids):
        v = complex(report.final_v[i])
        out.write(f"bus {bus} {abs(v):.6f} {math.degrees(math.atan2(v.imag, v.real)):.4f}\n")
    for f in report.branch_flows:
        out.write(f"branch {f.from_bus} {f.to_bus} "
                  f"{f.p_from:.4f} {f.q_from:.4f} {f.p_to:.4f} {f.q_to:.4f}\n")
    return out.getvalue()


def write_results_file(path: str, report: SolveReport, case_name: str = "") -> None:
    with open(path, "w") as fh:
        fh.write(format_results(report, case_name))


def read_results_file(path: str) -> tuple[dict[int, complex], list[tuple]]:
    """Inverse of write_results_file; returns (voltages, branch tuples)."""
    voltages: dict[int, complex] = {}
    branches: list[tuple] = []
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            try:
                if parts[0] == "bus" and len(parts) == 4:
                    bus = int(parts[1])
                    vm = float(parts[2])
                    va = math.radians(float(parts[3]))
                    voltages[bus] = vm * complex(math.cos(va), math.sin(va))
                elif parts[0] == "branch" and len(parts) == 7:
                    branches.append((int(parts[1]), int(parts[2]),
                                     *map(float, parts[3:])))
                else:
                    raise ValueError
            except ValueError:
                raise ValueError(f"{path}:{lineno}: unrecognized line {line!r}") from None
    return voltages, branches


def write_trace_csv(path: str, trace: list[IterationRecord]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["iter", "max_dv", "max_dp", "max_dq", "ms"])
        for rec in trace:
            writer.writerow([rec.iteration, f"{rec.max_dv:.6e}",
                             f"{rec.max_dp:.6e}", f"{rec.max_dq:.6e}",
                             f"{rec.ms:.3f}"])


def write_bench_csv(path: str, rows: list[tuple[int, float, int]]) -> None:
    """rows: (threads, median elapsed ms, iterations)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["threads", "ms", "iterations"])
        for threads, ms, iters in rows:
            writer.writerow([threads, f"{ms:.3f}", iters])


def write_scores(path: str, scores: dict[int, float]) -> None:
    """PageRank scores, one `vertex score` line, sorted by vertex id."""
    with open(path, "w") as fh:
        for vid in sorted(scores):
            fh.write(f"{vid} {scores[vid]:.12e}\n")


def read_trace_csv(path: str) -> list[IterationRecord]:
    out = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            out.append(IterationRecord(
                iteration=int(row["iter"]), max_dv=float(row["max_dv"]),
                max_dp=float(row["max_dp"]), max_dq=float(row["max_dq"]),
                ms=float(row["ms"])))
    return out
