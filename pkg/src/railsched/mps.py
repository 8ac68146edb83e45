"""MPS export of a RescheduleModel for external MILP solvers.

Fixed-format MPS with ROWS/COLUMNS/RHS/BOUNDS sections and INTORG/INTEND
markers; every variable is binary.  Column names pack (train, arc, entry
interval) into at most 8 characters using base-36 fields, reversibly: the exit
interval follows from the arc's fixed duration.  If any name cannot fit, the
writer falls back to free-format MPS and says so in a comment header.
"""

from __future__ import annotations

import warnings

from .core import to_interval
from .model import OccupationVar, PriorityVar, RescheduleModel

_B36 = "0123456789ABCDEFGHIJKLMNOPQRSTUVWXYZ"


def _b36(value: int, width: int) -> str:
    out = []
    v = value
    for _ in range(width):
        out.append(_B36[v % 36])
        v //= 36
    if v:
        raise OverflowError(f"{value} does not fit in {width} base-36 digits")
    return "".join(reversed(out))


def _from_b36(text: str) -> int:
    v = 0
    for ch in text:
        v = v * 36 + _B36.index(ch)
    return v


class _Names:
    """Reversible short names: X<kk><aa><ttt> for occupations, P<kk><mm><aa>
    for priorities, Z<kk><aa><ttt> for dwell indicators."""

    def __init__(self, model: RescheduleModel):
        self.trains = sorted(t.id for t in model.trains)
        self.t_index = {tid: i for i, tid in enumerate(self.trains)}
        arcs = sorted(model.network.blocks) + sorted(model.network.nodes)
        self.arcs = arcs
        self.a_index = {a: i for i, a in enumerate(arcs)}
        self.model = model

    def occupation(self, var: OccupationVar) -> str:
        return ("X" + _b36(self.t_index[var.train], 2)
                + _b36(self.a_index[var.arc], 2) + _b36(var.entry, 3))

    def priority(self, var: PriorityVar) -> str:
        return ("P" + _b36(self.t_index[var.first], 2)
                + _b36(self.t_index[var.second], 2) + _b36(self.a_index[var.block], 2))

    def dwell(self, zname: str) -> str:
        body = zname[2:-1]
        train, node, tau = body.split(",")
        return ("Z" + _b36(self.t_index[train], 2) + _b36(self.a_index[node], 2)
                + _b36(int(tau), 3))

    def decode(self, name: str):
        """Inverse of the occupation encoding: (train, arc, entry, exit)."""
        if not name.startswith("X"):
            raise ValueError(f"not an occupation column: {name}")
        train = self.trains[_from_b36(name[1:3])]
        arc = self.arcs[_from_b36(name[3:5])]
        entry = _from_b36(name[5:8])
        blk = self.model.network.blocks.get(arc)
        exit_ = entry + (blk.travel_time // self.model.grid.delta if blk else 0)
        return train, arc, entry, exit_


def _fixed(fields) -> str:
    """One fixed-format MPS line; fields at columns 2, 5, 15, 25, 40, 50."""
    starts = (1, 4, 14, 24, 39, 49)
    line = ""
    for start, text in zip(starts, fields):
        if text is None:
            continue
        if len(line) > start:
            return ""  # overflow: caller switches to free format
        line = line.ljust(start) + str(text)
    return line


def export_mps(model: RescheduleModel, name: str = "RESCHED") -> str:
    """Render the full 0-1 program; minimization objective named COST."""
    names = _Names(model)
    occ_vars, pri_vars = model.variables()
    grid = model.grid

    translate = {}
    columns: dict[str, list] = {}
    for var in occ_vars:
        translate[var.name()] = names.occupation(var)
        columns.setdefault(translate[var.name()], [])
    for var in pri_vars:
        translate[var.name()] = names.priority(var)
        columns.setdefault(translate[var.name()], [])

    # objective: sum of destination arrival times (minutes); constant offset of
    # -sum(initial origin arrivals) goes on the objective RHS
    obj: dict[str, float] = {}
    offset = 0.0
    for t in model.trains:
        offset += t.stops[0].arrive
        if not t.route:
            continue
        plan = model.plans[t.id]
        i = len(t.route) - 1
        dur = plan.durations[i]
        for e in range(plan.lower[i], plan.upper[i] + 1, grid.delta):
            var = OccupationVar(t.id, t.route[i], to_interval(e, grid),
                                to_interval(e + dur, grid))
            obj[translate[var.name()]] = float(e + dur)

    rows = []
    rhs = {}
    counter = 0
    for c in model.constraints():
        if c.kind != "row":
            continue
        counter += 1
        rid = f"C{counter:06d}"
        rows.append((rid, c.sense, c.tag))
        for term_name, coef in c.terms:
            col = translate.get(term_name)
            if col is None:
                col = names.dwell(term_name) if term_name.startswith("z[") else None
                if col is None:
                    raise KeyError(f"unknown variable {term_name}")
                translate[term_name] = col
                columns.setdefault(col, [])
            columns[col].append((rid, coef))
        if c.rhs:
            rhs[rid] = c.rhs
    # dwell indicator linkage: z >= arrived-by - departed-by, z binary
    z_rows = _dwell_linkage(model, names, translate, columns)
    for rid, sense, terms, rv in z_rows:
        rows.append((rid, sense, "eq19"))
        for col, coef in terms:
            columns.setdefault(col, []).append((rid, coef))
        if rv:
            rhs[rid] = rv
    for col, val in obj.items():
        columns[col].append(("COST", val))

    free = False
    lines = []

    def emit(fields):
        nonlocal free
        line = _fixed(fields)
        if not line:
            free = True
            line = " ".join(str(f) for f in fields if f is not None)
        lines.append(line)

    emit(("NAME", None, name))
    emit(("ROWS",))
    emit((" N", "COST"))
    for rid, sense, tag in rows:
        emit((f" {sense}", rid))
    emit(("COLUMNS",))
    emit((None, "MARKER", "'MARKER'", None, "'INTORG'"))
    for col in sorted(columns):
        entries = columns[col]
        if not entries:
            entries = [("COST", 0.0)]
        for i in range(0, len(entries), 2):
            chunk = entries[i:i + 2]
            fields = [None, col]
            for rid, coef in chunk:
                fields.extend([rid, f"{coef:.6g}"])
            emit(tuple(fields))
    emit((None, "MARKER", "'MARKER'", None, "'INTEND'"))
    emit(("RHS",))
    if offset:
        emit((None, "RHS", "COST", f"{-offset:.6g}"))
    for rid, sense, tag in rows:
        if rid in rhs:
            emit((None, "RHS", rid, f"{rhs[rid]:.6g}"))
    emit(("BOUNDS",))
    for col in sorted(columns):
        emit((" BV", "BND", col))
    emit(("ENDATA",))
    if free:
        warnings.warn("fixed-format field overflow; emitting free-format MPS")
        lines.insert(0, "* free-format MPS (fixed-format name overflow)")
    return "\n".join(lines) + "\n"


def _dwell_linkage(model, names, translate, columns):
    """Rows tying each capacity indicator z[k,n,tau] to the occupation choice.

    A train dwells at node n during tau when it has arrived (the inbound block
    or origin presence) but not yet departed (the outbound block): z >= sum of
    occupations proving arrival - sum proving departure ... simplified to the
    exact linear form z >= (arrived) - (departed).
    """
    out = []
    used = [t for t in model.constraints()
            if t.kind == "row" and t.tag == "eq19"]
    if not used:
        return out
    zmap: dict[str, tuple] = {}
    for c in used:
        for term_name, _ in c.terms:
            if term_name.startswith("z[") and term_name not in zmap:
                body = term_name[2:-1]
                train, node, tau = body.split(",")
                zmap[term_name] = (train, node, int(tau))
    grid = model.grid
    counter = 0
    trains = {t.id: t for t in model.trains}
    for term_name, (tid, node, tau) in sorted(zmap.items()):
        t = trains[tid]
        plan = model.plans[tid]
        minute = grid.start + tau * grid.delta
        arrived: list = []
        departed: list = []
        idx = [i for i, s in enumerate(t.stops) if s.node == node]
        if not idx:
            continue
        i = idx[0]
        if i == 0:
            arrived = None  # present from the pinned arrival onward
        else:
            inbound = i - 1
            dur = plan.durations[inbound]
            for e in range(plan.lower[inbound], plan.upper[inbound] + 1, grid.delta):
                if e + dur <= minute:
                    var = OccupationVar(tid, t.route[inbound], to_interval(e, grid),
                                        to_interval(e + dur, grid))
                    arrived.append((translate[var.name()], 1.0))
        if i < len(t.route):
            dur = plan.durations[i]
            for e in range(plan.lower[i], plan.upper[i] + 1, grid.delta):
                if e <= minute:
                    var = OccupationVar(tid, t.route[i], to_interval(e, grid),
                                        to_interval(e + dur, grid))
                    departed.append((translate[var.name()], 1.0))
        zcol = names.dwell(term_name)
        translate[term_name] = zcol
        columns.setdefault(zcol, [])
        counter += 1
        rid = f"Z{counter:06d}"
        # z - arrived + departed >= 0 when arrival is pinned (origin):
        # z >= 1 - departed  <=>  z + departed >= 1
        if arrived is None:
            terms = [(zcol, 1.0)] + departed
            out.append((rid, "G", terms, 1.0 if t.stops[0].arrive <= minute else 0.0))
        else:
            terms = [(zcol, 1.0)] + [(c, -v) for c, v in arrived] + departed
            out.append((rid, "G", terms, 0.0))
    return out


def decode_column(model: RescheduleModel, column: str):
    """Recover (train, arc, entry interval, exit interval) from a column name."""
    return _Names(model).decode(column)
