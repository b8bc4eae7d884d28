"""MATPOWER case file handling: parse, validate, serialize, replicate.

Only the columns the solver consumes are kept. Column layout (1-indexed,
per the MATPOWER manual):

    bus:    1 bus_i, 2 type, 3 Pd, 4 Qd, 5 Gs, 6 Bs, 7 area, 8 Vm,
            9 Va, 10 baseKV, 11 zone, 12 Vmax, 13 Vmin
    gen:    1 bus, 2 Pg, 3 Qg, 4 Qmax, 5 Qmin, 6 Vg, 7 mBase, 8 status
    branch: 1 fbus, 2 tbus, 3 r, 4 x, 5 b, 6-8 rateA/B/C, 9 ratio,
            10 angle, 11 status

Rows may carry extra trailing columns (Pmax, angmin, ...); they are
ignored. Rows narrower than the required minimum are a parse error.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, replace
from enum import IntEnum
from pathlib import Path


class CaseParseError(ValueError):
    """MATPOWER text could not be tokenized into the expected tables."""


class CaseValidationError(ValueError):
    """Parsed tables violate a structural requirement."""


class BusType(IntEnum):
    """MATPOWER bus type codes. Type 4 (isolated) is rejected at parse."""

    PQ = 1
    PV = 2
    SLACK = 3


@dataclass(frozen=True)
class BusRecord:
    id: int
    bus_type: BusType
    pd: float       # MW
    qd: float       # MVAr
    gs: float       # MW at V = 1.0 pu
    bs: float       # MVAr at V = 1.0 pu
    vm: float       # pu
    va: float       # degrees
    base_kv: float


@dataclass(frozen=True)
class GenRecord:
    bus_id: int
    pg: float       # MW
    qg: float       # MVAr
    vg: float       # pu setpoint
    status: int     # >0 in service


@dataclass(frozen=True)
class BranchRecord:
    from_bus: int
    to_bus: int
    r: float        # pu
    x: float        # pu
    b: float        # total charging, pu
    tap: float      # off-nominal ratio, 0 means "no transformer"
    shift: float    # degrees
    status: int     # 1 in service


@dataclass(frozen=True)
class RawCase:
    name: str
    base_mva: float
    buses: tuple[BusRecord, ...]
    gens: tuple[GenRecord, ...]
    branches: tuple[BranchRecord, ...]


@dataclass(frozen=True)
class Diagnostic:
    severity: str          # "error" | "warning"
    message: str
    record: object = None

    @property
    def is_error(self) -> bool:
        return self.severity == "error"


_FUNC_RE = re.compile(r"function\s+\w+\s*=\s*(\w+)")
_BASE_RE = re.compile(r"mpc\.baseMVA\s*=\s*([^;%]+);")
_BLOCK_START_RE = re.compile(r"mpc\.(\w+)\s*=\s*\[")

_MIN_COLS = {"bus": 13, "gen": 8, "branch": 11}


def _strip_comment(line: str) -> str:
    cut = line.find("%")
    return line if cut < 0 else line[:cut]


def _scan_blocks(source_text: str) -> dict[str, list[tuple[int, list[float]]]]:
    """Collect every ``mpc.<name> = [ rows ];`` block.

    Returns name -> list of (line_number, numeric row). Line numbers are
    1-based into the original text.
    """
    blocks: dict[str, list[tuple[int, list[float]]]] = {}
    lines = source_text.splitlines()
    current: str | None = None
    for ln, raw in enumerate(lines, start=1):
        line = _strip_comment(raw).strip()
        if not line:
            continue
        if current is None:
            m = _BLOCK_START_RE.search(line)
            if not m:
                continue
            current = m.group(1)
            blocks.setdefault(current, [])
            line = line[m.end():].strip()
            if not line:
                continue
        # inside a block: rows of numbers, each terminated by ';',
        # block closed by '];'
        closed = False
        if line.endswith("];"):
            closed = True
            line = line[:-2].strip()
        elif line == "]":
            # tolerate a lone closing bracket
            closed = True
            line = ""
        for chunk in line.split(";"):
            chunk = chunk.strip()
            if not chunk:
                continue
            row: list[float] = []
            for tok in chunk.split():
                try:
                    row.append(float(tok))
                except ValueError:
                    raise CaseParseError(
                        f"line {ln}: non-numeric token {tok!r} in mpc.{current}"
                    ) from None
            if row:
                blocks[current].append((ln, row))
        if closed:
            current = None
    if current is not None:
        raise CaseParseError(f"mpc.{current} block not terminated by '];'")
    return blocks


def _require_width(name: str, ln: int, row: list[float]) -> None:
    need = _MIN_COLS[name]
    if len(row) < need:
        raise CaseParseError(
            f"line {ln}: mpc.{name} row has {len(row)} columns, need >= {need}"
        )


def parse_matpower(source_text: str, name: str = "") -> RawCase:
    """Parse MATPOWER ``.m`` case text into a RawCase.

    Raises CaseParseError for malformed text and CaseValidationError for
    structurally empty or mistyped data (no buses, bus type outside
    {1, 2, 3}). Deeper topology checks live in validate_case.
    """
    if not name:
        m = _FUNC_RE.search(source_text)
        name = m.group(1) if m else "case"

    m = _BASE_RE.search(source_text)
    if m is None:
        raise CaseParseError("missing mpc.baseMVA assignment")
    try:
        base_mva = float(m.group(1).strip())
    except ValueError:
        raise CaseParseError(
            f"non-numeric mpc.baseMVA value {m.group(1).strip()!r}"
        ) from None

    blocks = _scan_blocks(source_text)
    for required in ("bus", "gen", "branch"):
        if required not in blocks:
            raise CaseParseError(f"missing mpc.{required} block")

    buses: list[BusRecord] = []
    for ln, row in blocks["bus"]:
        _require_width("bus", ln, row)
        code = int(row[1])
        if code not in (1, 2, 3):
            raise CaseValidationError(
                f"line {ln}: bus {int(row[0])} has unsupported type {code}"
            )
        buses.append(BusRecord(
            id=int(row[0]), bus_type=BusType(code),
            pd=row[2], qd=row[3], gs=row[4], bs=row[5],
            vm=row[7], va=row[8], base_kv=row[9],
        ))
    if not buses:
        raise CaseValidationError("no buses")

    gens: list[GenRecord] = []
    for ln, row in blocks["gen"]:
        _require_width("gen", ln, row)
        gens.append(GenRecord(
            bus_id=int(row[0]), pg=row[1], qg=row[2], vg=row[5],
            status=1 if row[7] > 0 else 0,
        ))

    branches: list[BranchRecord] = []
    for ln, row in blocks["branch"]:
        _require_width("branch", ln, row)
        branches.append(BranchRecord(
            from_bus=int(row[0]), to_bus=int(row[1]),
            r=row[2], x=row[3], b=row[4],
            tap=row[8], shift=row[9],
            status=1 if row[10] > 0 else 0,
        ))

    if base_mva <= 0:
        raise CaseValidationError(f"baseMVA must be positive, got {base_mva}")

    return RawCase(name=name, base_mva=base_mva, buses=tuple(buses),
                   gens=tuple(gens), branches=tuple(branches))


def parse_matpower_file(path: str | Path) -> RawCase:
    path = Path(path)
    return parse_matpower(path.read_text(), name=path.stem)


def validate_case(case: RawCase) -> list[Diagnostic]:
    """Structural checks; empty result means the case is usable.

    Errors: duplicate/nonpositive bus ids, dangling gen/branch references,
    self-loop branches, in-service branches with r = x = 0, nonpositive
    start voltages, and any connected component (over in-service branches)
    whose slack count differs from one. PV buses without an in-service
    generator only warn; their setpoint falls back to the case Vm.
    """
    diags: list[Diagnostic] = []
    seen: dict[int, BusRecord] = {}
    for bus in case.buses:
        if bus.id in seen:
            diags.append(Diagnostic("error", f"duplicate bus id {bus.id}", bus))
        seen[bus.id] = bus
        if bus.id <= 0:
            diags.append(Diagnostic("error", f"bus id {bus.id} must be positive", bus))
        if bus.vm <= 0:
            diags.append(Diagnostic(
                "error", f"bus {bus.id} start voltage vm={bus.vm} is not positive", bus))

    gen_buses: set[int] = set()
    for gen in case.gens:
        if gen.bus_id not in seen:
            diags.append(Diagnostic(
                "error", f"generator references missing bus {gen.bus_id}", gen))
        elif gen.status:
            gen_buses.add(gen.bus_id)

    for br in case.branches:
        for end in (br.from_bus, br.to_bus):
            if end not in seen:
                diags.append(Diagnostic(
                    "error",
                    f"branch {br.from_bus}-{br.to_bus} references missing bus {end}",
                    br))
        if br.from_bus == br.to_bus:
            diags.append(Diagnostic(
                "error", f"branch {br.from_bus}-{br.to_bus} is a self-loop", br))
        if br.status and br.r == 0.0 and br.x == 0.0:
            diags.append(Diagnostic(
                "error",
                f"in-service branch {br.from_bus}-{br.to_bus} has r = x = 0",
                br))

    for bus in case.buses:
        if bus.bus_type is not BusType.PQ and bus.id not in gen_buses:
            diags.append(Diagnostic(
                "warning",
                f"{bus.bus_type.name} bus {bus.id} has no in-service generator; "
                f"using case Vm as setpoint", bus))

    # one slack per connected component (in-service branches only)
    if not any(d.is_error for d in diags):
        parent = {b.id: b.id for b in case.buses}

        def find(a: int) -> int:
            while parent[a] != a:
                parent[a] = parent[parent[a]]
                a = parent[a]
            return a

        for br in case.branches:
            if br.status:
                ra, rb = find(br.from_bus), find(br.to_bus)
                if ra != rb:
                    parent[ra] = rb
        slack_count: dict[int, int] = {}
        for bus in case.buses:
            root = find(bus.id)
            slack_count.setdefault(root, 0)
            if bus.bus_type is BusType.SLACK:
                slack_count[root] += 1
        for root, count in sorted(slack_count.items()):
            if count != 1:
                diags.append(Diagnostic(
                    "error",
                    f"component containing bus {root} has {count} slack buses, "
                    f"expected exactly 1"))
    return diags


def ensure_valid(case: RawCase) -> None:
    """Raise CaseValidationError on the first validation error."""
    errors = [d for d in validate_case(case) if d.is_error]
    if errors:
        raise CaseValidationError(
            f"case {case.name!r}: " + "; ".join(d.message for d in errors[:5]))


def _id_offset_step(case: RawCase) -> int:
    """Smallest power of ten >= the highest bus id."""
    top = max(b.id for b in case.buses)
    step = 1
    while step < top:
        step *= 10
    return step


def replicate_case(case: RawCase, k: int) -> RawCase:
    """Tile the case into k disjoint electrical islands.

    Copy m (m = 0..k-1) shifts every bus id by m * step where step is the
    highest original bus id rounded up to a power of ten. Each island
    keeps its own slack, so the solved state of every island must match
    the original case.
    """
    if k < 1:
        raise ValueError(f"replication count must be >= 1, got {k}")
    ensure_valid(case)
    if k == 1:
        return replace(case, name=f"{case.name}_x1")
    step = _id_offset_step(case)
    buses: list[BusRecord] = []
    gens: list[GenRecord] = []
    branches: list[BranchRecord] = []
    for m in range(k):
        off = m * step
        buses.extend(replace(b, id=b.id + off) for b in case.buses)
        gens.extend(replace(g, bus_id=g.bus_id + off) for g in case.gens)
        branches.extend(
            replace(br, from_bus=br.from_bus + off, to_bus=br.to_bus + off)
            for br in case.branches)
    return RawCase(name=f"{case.name}_x{k}", base_mva=case.base_mva,
                   buses=tuple(buses), gens=tuple(gens), branches=tuple(branches))


def _num(x: float) -> str:
    """Shortest exact decimal form; keeps text round-trips lossless."""
    if x == int(x) and abs(x) < 1e15:
        return str(int(x))
    return repr(x)


def write_matpower(case: RawCase) -> str:
    """Serialize back to MATPOWER text (13/10/13 column tables).

    Columns the parser does not keep are emitted as fixed fillers, so
    parse(write(case)) == case field for field.
    """
    out: list[str] = []
    out.append(f"function mpc = {case.name}")
    out.append("mpc.version = '2';")
    out.append("")
    out.append("%% system MVA base")
    out.append(f"mpc.baseMVA = {_num(case.base_mva)};")
    out.append("")
    out.append("%% bus data")
    out.append("%\tbus_i\ttype\tPd\tQd\tGs\tBs\tarea\tVm\tVa\tbaseKV\tzone\tVmax\tVmin")
    out.append("mpc.bus = [")
    for b in case.buses:
        out.append("\t" + "\t".join([
            str(b.id), str(int(b.bus_type)), _num(b.pd), _num(b.qd),
            _num(b.gs), _num(b.bs), "1", _num(b.vm), _num(b.va),
            _num(b.base_kv), "1", "1.1", "0.9",
        ]) + ";")
    out.append("];")
    out.append("")
    out.append("%% generator data")
    out.append("%\tbus\tPg\tQg\tQmax\tQmin\tVg\tmBase\tstatus\tPmax\tPmin")
    out.append("mpc.gen = [")
    for g in case.gens:
        out.append("\t" + "\t".join([
            str(g.bus_id), _num(g.pg), _num(g.qg), "0", "0",
            _num(g.vg), _num(case.base_mva), str(g.status), "0", "0",
        ]) + ";")
    out.append("];")
    out.append("")
    out.append("%% branch data")
    out.append("%\tfbus\ttbus\tr\tx\tb\trateA\trateB\trateC\tratio\tangle\tstatus\tangmin\tangmax")
    out.append("mpc.branch = [")
    for br in case.branches:
        out.append("\t" + "\t".join([
            str(br.from_bus), str(br.to_bus), _num(br.r), _num(br.x),
            _num(br.b), "0", "0", "0", _num(br.tap), _num(br.shift),
            str(br.status), "-360", "360",
        ]) + ";")
    out.append("];")
    out.append("")
    return "\n".join(out)


def write_matpower_file(case: RawCase, path: str | Path) -> None:
    Path(path).write_text(write_matpower(case))
