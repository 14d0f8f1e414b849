"""MATPOWER-style case file input and output.

Consumes the bus table (type, Pd, Qd, Gs, Bs, Vmax, Vmin), generator table
(bus, Pg, Qg, Qmax, Qmin, Pmax, Pmin, status) and branch table (fbus, tbus,
r, x, b, rateA, ratio, angle, status); every other column and block
(gencost, bus names, ...) is ignored. Branch angles are degrees in the file
and radians in the model. Shunts are converted from MW/MVAr at 1 pu to pu
admittance on the system base.
"""

from __future__ import annotations

import math

from .model import Branch, Bus, CaseError, Generator, Network, PQ, PV, SLACK, validate_network

_BUS_TYPE = {1: PQ, 2: PV, 3: SLACK, 4: PQ}  # 4 = isolated, handled as load bus

# MATPOWER column positions (0-based)
_BUS_COLS = 13
_GEN_COLS = 10
_BRANCH_COLS = 11


def _num(token: str, line_no: int) -> float:
    try:
        return float(token)
    except ValueError:
        raise CaseError(f"malformed row: {token!r} is not a number", line_no) from None


def _split_blocks(text: str) -> tuple[float, dict[str, list[tuple[int, list[str]]]]]:
    """Return (base_mva, blocks) where blocks maps table name to (line_no, tokens) rows."""
    base_mva: float | None = None
    blocks: dict[str, list[tuple[int, list[str]]]] = {}
    current: str | None = None
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("%", 1)[0].strip()
        if not line:
            continue
        if current is None:
            if line.startswith("mpc.baseMVA"):
                value = line.split("=", 1)[1].strip().rstrip(";").strip()
                base_mva = _num(value, line_no)
            elif line.startswith("mpc.") and "[" in line:
                name = line.split("=", 1)[0].strip()[len("mpc."):]
                current = name
                blocks.setdefault(name, [])
                remainder = line.split("[", 1)[1].strip()
                if remainder and remainder not in ("]", "];"):
                    # rows may start on the header line
                    if "]" in remainder:
                        remainder = remainder.split("]", 1)[0].strip()
                        current = None
                    if remainder:
                        blocks[name].append((line_no, remainder.rstrip(";").split()))
            continue
        if line.startswith("]"):
            current = None
            continue
        row = line.rstrip(";").strip()
        if "]" in row:
            row = row.split("]", 1)[0].strip()
            if row:
                blocks[current].append((line_no, row.split()))
            current = None
            continue
        if row:
            blocks[current].append((line_no, row.split()))
    if base_mva is None:
        raise CaseError("missing mpc.baseMVA")
    return base_mva, blocks


def parse_case(text: str, default_v_limits: tuple[float, float] = (0.95, 1.05)) -> Network:
    """Parse case text into a validated per-unit Network.

    Out-of-service elements are retained with in_service=False. Buses whose
    Vmin/Vmax columns are zero get the default steady-state band.

    Raises CaseError (with the offending line number where applicable) for
    malformed rows, unknown bus references, zero reactance and missing slack.
    """
    base_mva, blocks = _split_blocks(text)
    if "bus" not in blocks or not blocks["bus"]:
        raise CaseError("missing bus table")
    if "branch" not in blocks:
        raise CaseError("missing branch table")

    v_min_default, v_max_default = default_v_limits
    buses: dict[str, Bus] = {}
    for line_no, tokens in blocks["bus"]:
        if len(tokens) < _BUS_COLS:
            raise CaseError(f"malformed row: expected {_BUS_COLS} bus columns, got {len(tokens)}", line_no)
        vals = [_num(t, line_no) for t in tokens[:_BUS_COLS]]
        bus_id = _canon_id(vals[0])
        if bus_id in buses:
            raise CaseError(f"duplicate bus {bus_id}", line_no)
        btype = int(vals[1])
        if btype not in _BUS_TYPE:
            raise CaseError(f"malformed row: unknown bus type {btype}", line_no)
        v_max = vals[11] if vals[11] > 0 else v_max_default
        v_min = vals[12] if vals[12] > 0 else v_min_default
        buses[bus_id] = Bus(
            id=bus_id,
            kind=_BUS_TYPE[btype],
            v_setpoint=1.0,
            v_min=v_min,
            v_max=v_max,
            p_load=vals[2],
            q_load=vals[3],
            shunt_g=vals[4] / base_mva,
            shunt_b=vals[5] / base_mva,
        )

    generators: dict[str, Generator] = {}
    for row_no, (line_no, tokens) in enumerate(blocks.get("gen", []), start=1):
        if len(tokens) < _GEN_COLS:
            raise CaseError(f"malformed row: expected {_GEN_COLS} generator columns, got {len(tokens)}", line_no)
        vals = [_num(t, line_no) for t in tokens[:_GEN_COLS]]
        bus_id = _canon_id(vals[0])
        if bus_id not in buses:
            raise CaseError(f"unknown bus {bus_id}", line_no)
        generators[f"G{row_no}"] = Generator(
            id=f"G{row_no}",
            bus=bus_id,
            p=vals[1],
            q=vals[2],
            q_max=vals[3],
            q_min=vals[4],
            p_max=vals[8],
            p_min=vals[9],
            in_service=vals[7] > 0,
        )

    branches: dict[str, Branch] = {}
    for row_no, (line_no, tokens) in enumerate(blocks["branch"], start=1):
        if len(tokens) < _BRANCH_COLS:
            raise CaseError(f"malformed row: expected {_BRANCH_COLS} branch columns, got {len(tokens)}", line_no)
        vals = [_num(t, line_no) for t in tokens[:_BRANCH_COLS]]
        from_id, to_id = _canon_id(vals[0]), _canon_id(vals[1])
        if from_id not in buses:
            raise CaseError(f"unknown bus {from_id}", line_no)
        if to_id not in buses:
            raise CaseError(f"unknown bus {to_id}", line_no)
        if vals[3] == 0.0:
            raise CaseError(f"zero reactance on branch {from_id}-{to_id}", line_no)
        ratio = vals[8]
        branches[f"B{row_no}"] = Branch(
            id=f"B{row_no}",
            from_bus=from_id,
            to_bus=to_id,
            r=vals[2],
            x=vals[3],
            b_charging=vals[4],
            rating=vals[5],
            tap_ratio=ratio if ratio != 0.0 else 1.0,
            phase_shift=math.radians(vals[9]),
            in_service=vals[10] > 0,
        )

    net = Network(buses=buses, branches=branches, generators=generators, base_mva=base_mva)
    validate_network(net)
    return net


def _canon_id(value: float) -> str:
    return str(int(value)) if value == int(value) else str(value)


def _fmt(value: float) -> str:
    if value == int(value) and abs(value) < 1e15:
        return str(int(value))
    return repr(float(value))


def serialize_case(net: Network, name: str = "case") -> str:
    """Emit the network as MATPOWER-format text (retained columns only).

    parse_case(serialize_case(net)) reproduces the network on the retained
    field set; element ids are regenerated from row order, which this
    writer preserves.
    """
    kind_code = {PQ: 1, PV: 2, SLACK: 3}
    lines = [f"function mpc = {name}", "mpc.version = '2';", f"mpc.baseMVA = {_fmt(net.base_mva)};", ""]
    lines.append("mpc.bus = [")
    for b in net.buses.values():
        row = [
            b.id, kind_code[b.kind], _fmt(b.p_load), _fmt(b.q_load),
            _fmt(b.shunt_g * net.base_mva), _fmt(b.shunt_b * net.base_mva),
            1, 1, 0, 0, 1, _fmt(b.v_max), _fmt(b.v_min),
        ]
        lines.append("\t" + "\t".join(str(v) for v in row) + ";")
    lines.append("];")
    lines.append("mpc.gen = [")
    for g in net.generators.values():
        row = [
            g.bus, _fmt(g.p), _fmt(g.q), _fmt(g.q_max), _fmt(g.q_min), 1, _fmt(net.base_mva),
            1 if g.in_service else 0, _fmt(g.p_max), _fmt(g.p_min),
        ]
        lines.append("\t" + "\t".join(str(v) for v in row) + ";")
    lines.append("];")
    lines.append("mpc.branch = [")
    for br in net.branches.values():
        row = [
            br.from_bus, br.to_bus, _fmt(br.r), _fmt(br.x), _fmt(br.b_charging),
            _fmt(br.rating), 0, 0, _fmt(br.tap_ratio), _fmt(math.degrees(br.phase_shift)),
            1 if br.in_service else 0, -360, 360,
        ]
        lines.append("\t" + "\t".join(str(v) for v in row) + ";")
    lines.append("];")
    lines.append("")
    return "\n".join(lines)
