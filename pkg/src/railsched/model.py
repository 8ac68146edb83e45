"""Time-expanded 0-1 rescheduling program: basic and adjusted variants.

The generated :class:`RescheduleModel` carries the entry-time domains the
solver searches over plus a tagged constraint catalog (one tag per source
equation) that backs the MPS export and the structural tests.  Occupation
variables x[train, arc, t, t'] are binary; a real block pins t' - t to its
traversal time, node self-loops represent waiting.

Rules enforced per tag:

* eq2   one arc per train per interval            * eq13  priority completeness
* eq3   route confinement (structural)            * eq14-17 big-M headway
* eq4   horizon bounds                            * eq18  minimum dwell
* eq5   flow balance (structural encoding)        * eq19  dwelling capacity
* eq6   opposing conflict + closure extension     * eq20  per-node delay cap
* eq7   fixed traversal duration (structural)     * eq21/22 pre-disruption freeze
* eq8-12 time linkage (structural)                * eq23/24 no early running
* eq29/30 freeze of unaffected trains (adjusted variant)

Headway rows are emitted for every train pair sharing a block; the effective
headway is h_ij for same-direction pairs and 0 for opposing pairs, whose real
separation comes from eq6.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from .core import (Closure, DisruptionScenario, InstanceError, ModelConfig,
                   RailNetwork, TimeGrid, TrainService, baseline_objective,
                   overlaps, to_interval)


@dataclass(frozen=True)
class OccupationVar:
    train: str
    arc: str  # block id, or node id for a waiting self-loop
    entry: int  # interval index
    exit: int

    def name(self) -> str:
        return f"x[{self.train},{self.arc},{self.entry},{self.exit}]"


@dataclass(frozen=True)
class PriorityVar:
    first: str
    second: str
    block: str

    def name(self) -> str:
        return f"p[{self.first},{self.second},{self.block}]"


@dataclass(frozen=True)
class Constraint:
    """One catalog row.  `kind` 'row' rows carry linear terms for export;
    'structural' rows record families enforced by the encoding itself."""

    tag: str
    kind: str  # "row" | "bound" | "structural"
    sense: str = ""  # "L" | "G" | "E" for rows
    terms: tuple = ()
    rhs: float = 0.0
    note: str = ""


@dataclass
class ClosureGrid:
    """Per block, per interval: number of tracks closed, with window metadata."""

    grid: TimeGrid
    counts: dict  # block id -> list[int] of length Z
    windows: dict  # block id -> list[Closure]

    def tracks_closed(self, block: str, interval: int) -> int:
        arr = self.counts.get(block)
        return arr[interval] if arr is not None and 0 <= interval < len(arr) else 0

    def closures_for(self, block: str) -> list:
        return self.windows.get(block, [])

    def max_closed_overlap(self, block: str, entry_min: int, exit_min: int) -> int:
        worst = 0
        for c in self.closures_for(block):
            if overlaps(entry_min, exit_min, c.start, c.end):
                worst = max(worst, c.tracks_closed)
        return worst


def materialize_closures(scenario: DisruptionScenario, grid: TimeGrid,
                         network: RailNetwork) -> ClosureGrid:
    scenario.validate(network, grid)
    counts: dict[str, list[int]] = {}
    windows: dict[str, list[Closure]] = {}
    for c in scenario.closures:
        arr = counts.setdefault(c.block, [0] * grid.intervals)
        lo = to_interval(c.start, grid)
        hi = to_interval(c.end, grid)
        for i in range(lo, hi):
            arr[i] += c.tracks_closed
            if arr[i] > network.blocks[c.block].tracks:
                raise InstanceError("tracks_closed exceeds block tracks", c.block)
        windows.setdefault(c.block, []).append(c)
    return ClosureGrid(grid=grid, counts=counts, windows=windows)


def _crossing_direction(occ) -> tuple[str, str]:
    return (occ.from_node, occ.to_node)


def identify_affected(trains, scenario: DisruptionScenario, beta: int,
                      network: Optional[RailNetwork] = None) -> set:
    """Trains R* directly hit by the disruption.

    Direct members cross a closed block (in a closed direction) during the
    window; each is followed transitively by any same-direction train whose
    initial entry comes less than `beta` minutes after the previous affected
    train's initial exit.
    """
    affected: set[str] = set()
    for c in scenario.closures:
        closed_dirs: Optional[set] = None  # None = both directions
        if network is not None:
            blk = network.blocks[c.block]
            if c.tracks_closed < blk.tracks and c.direction is not None:
                closed_dirs = {tuple(c.direction)}
        elif c.direction is not None:
            closed_dirs = {tuple(c.direction)}
        by_direction: dict[tuple, list] = {}
        for t in trains:
            for occ in t.occupations():
                if occ.block != c.block:
                    continue
                by_direction.setdefault(_crossing_direction(occ), []).append((t.id, occ))
        for direction, crossings in by_direction.items():
            if closed_dirs is not None and direction not in closed_dirs:
                continue
            crossings.sort(key=lambda item: item[1].entry)
            last_affected_exit = None
            for tid, occ in crossings:
                if overlaps(occ.entry, occ.exit, c.start, c.end):
                    affected.add(tid)
                    last_affected_exit = occ.exit
                elif (last_affected_exit is not None and occ.entry >= c.end
                      and occ.entry - last_affected_exit < beta):
                    affected.add(tid)
                    last_affected_exit = occ.exit
    return affected


@dataclass
class TrainPlan:
    """Search-ready view of one train: per-route-block entry domains in minutes."""

    train: TrainService
    durations: tuple[int, ...]
    initial_entries: tuple[int, ...]
    lower: list[int]
    upper: list[int]
    frozen: tuple[bool, ...]
    beta_capped: tuple[bool, ...]  # eq20 applies to this entry (basic variant)
    node_dwell: tuple[int, ...]  # minimum dwell at the node ahead of each entry


@dataclass
class RescheduleModel:
    network: RailNetwork
    trains: list
    grid: TimeGrid
    scenario: DisruptionScenario
    config: ModelConfig
    closures: ClosureGrid
    plans: dict  # train id -> TrainPlan
    affected: Optional[frozenset]  # R*, adjusted variant only
    big_m: int
    baseline: int
    sharing_pairs: list  # (train a, train b, block id) with a < b

    _catalog: Optional[list] = field(default=None, repr=False)
    _variables: Optional[tuple] = field(default=None, repr=False)

    @property
    def variant(self) -> str:
        return self.config.variant

    def variables(self) -> tuple[list[OccupationVar], list[PriorityVar]]:
        if self._variables is None:
            self._variables = _build_variables(self)
        return self._variables

    def constraints(self) -> list[Constraint]:
        if self._catalog is None:
            self._catalog = _build_catalog(self)
        return self._catalog

    def constraint_tags(self) -> set:
        return {c.tag for c in self.constraints()}


def _is_counted(train: TrainService, stop_idx: int, t_dis: Optional[int]) -> bool:
    """eq20/eq21 quantify over nodes by their *initial* departure vs t_dis."""
    if t_dis is None:
        return False
    return train.stops[stop_idx].depart >= t_dis


def _build_plan(train: TrainService, network: RailNetwork, grid: TimeGrid,
                closures: ClosureGrid, config: ModelConfig, t_dis: Optional[int],
                frozen_whole: bool) -> TrainPlan:
    occ = train.occupations()
    durations = tuple(network.blocks[o.block].travel_time for o in occ)
    initial = tuple(o.entry for o in occ)
    n = len(occ)
    remaining = [0] * (n + 1)
    for i in range(n - 1, -1, -1):
        nxt_dwell = network.nodes[train.stops[i + 1].node].dwell_min if i < n - 1 else 0
        remaining[i] = durations[i] + nxt_dwell + remaining[i + 1]
    lower = list(initial)
    upper = []
    frozen = []
    capped = []
    dwell = []
    thr = None if t_dis is None else t_dis - config.beta
    for i in range(n):
        ub = grid.end - remaining[i]
        if frozen_whole:
            ub = initial[i]
        elif config.variant == "basic" and t_dis is not None:
            if _is_counted(train, i, t_dis):
                ub = min(ub, initial[i] + config.beta)  # eq20, per node
            if train.stops[i].depart < thr:
                # eq21 freezes the departure; this also pins every occupation
                # lying wholly before the freeze line (eq22), since departures
                # are exactly the block entries in this encoding.
                ub = initial[i]
        upper.append(ub)
        frozen.append(ub <= initial[i])
        capped.append(config.variant == "basic" and _is_counted(train, i, t_dis))
        dwell.append(network.nodes[train.stops[i].node].dwell_min if i > 0 else 0)
    return TrainPlan(train=train, durations=durations, initial_entries=initial,
                     lower=lower, upper=upper, frozen=tuple(frozen),
                     beta_capped=tuple(capped), node_dwell=tuple(dwell))


def _shared_blocks(trains) -> list:
    by_block: dict[str, list[str]] = {}
    for t in trains:
        for blk in t.route:
            by_block.setdefault(blk, []).append(t.id)
    pairs = []
    for blk in sorted(by_block):
        ids = sorted(by_block[blk])
        for i in range(len(ids)):
            for j in range(i + 1, len(ids)):
                pairs.append((ids[i], ids[j], blk))
    return pairs


def _build(network: RailNetwork, trains, grid: TimeGrid, scenario: DisruptionScenario,
           config: ModelConfig) -> RescheduleModel:
    for t in trains:
        t.validate(network, grid)  # structural defects surface here
    closures = materialize_closures(scenario, grid, network)
    t_dis = scenario.start()
    affected = None
    if config.variant == "adjusted":
        affected = frozenset(identify_affected(trains, scenario, config.beta, network))
    plans = {}
    for t in trains:
        frozen_whole = config.variant == "adjusted" and t.id not in affected
        plans[t.id] = _build_plan(t, network, grid, closures, config, t_dis, frozen_whole)
    big_m = config.resolved_big_m(network, grid)
    return RescheduleModel(network=network, trains=list(trains), grid=grid,
                           scenario=scenario, config=config, closures=closures,
                           plans=plans, affected=affected, big_m=big_m,
                           baseline=baseline_objective(trains),
                           sharing_pairs=_shared_blocks(trains))


def build_basic(network: RailNetwork, trains, grid: TimeGrid,
                scenario: DisruptionScenario, config: ModelConfig) -> RescheduleModel:
    """Full program over every train, eqs 1-24."""
    if config.variant != "basic":
        config = ModelConfig(beta=config.beta, big_m=config.big_m,
                             capacity_mode=config.capacity_mode, variant="basic")
    return _build(network, trains, grid, scenario, config)


def build_adjusted(network: RailNetwork, trains, grid: TimeGrid,
                   scenario: DisruptionScenario, config: ModelConfig) -> RescheduleModel:
    """Variant that frees only R*: eq20 dropped, eqs 29/30 freeze everyone else."""
    if config.variant != "adjusted":
        config = ModelConfig(beta=config.beta, big_m=config.big_m,
                             capacity_mode=config.capacity_mode, variant="adjusted")
    return _build(network, trains, grid, scenario, config)


# ---------------------------------------------------------------------------
# explicit variable / constraint materialization (export + structural tests)

def _build_variables(model: RescheduleModel):
    occ_vars: list[OccupationVar] = []
    grid = model.grid
    for t in model.trains:
        plan = model.plans[t.id]
        for i, blk in enumerate(t.route):
            dur = plan.durations[i]
            for e in range(plan.lower[i], plan.upper[i] + 1, grid.delta):
                occ_vars.append(OccupationVar(t.id, blk, to_interval(e, grid),
                                              to_interval(e + dur, grid)))
    pri_vars = [PriorityVar(a, b, blk) for a, b, blk in model.sharing_pairs]
    pri_vars += [PriorityVar(b, a, blk) for a, b, blk in model.sharing_pairs]
    return occ_vars, pri_vars


def _direction_on(train: TrainService, block: str) -> tuple[str, str]:
    for occ in train.occupations():
        if occ.block == block:
            return (occ.from_node, occ.to_node)
    raise InstanceError(f"train does not use block {block}", train.id)


def _entry_expr(model: RescheduleModel, train: TrainService, i: int):
    """Entry time of route block i as a linear form over its occupation vars."""
    plan = model.plans[train.id]
    blk = train.route[i]
    terms = []
    for e in range(plan.lower[i], plan.upper[i] + 1, model.grid.delta):
        var = OccupationVar(train.id, blk, to_interval(e, model.grid),
                            to_interval(e + plan.durations[i], model.grid))
        terms.append((var.name(), float(e)))
    return terms


def _build_catalog(model: RescheduleModel) -> list[Constraint]:
    rows: list[Constraint] = []
    grid = model.grid
    t_dis = model.scenario.start()
    thr = None if t_dis is None else t_dis - model.config.beta
    add = rows.append

    add(Constraint("eq3", "structural",
                   note="occupation variables exist only for route blocks"))
    add(Constraint("eq5", "structural",
                   note="one entry per route block + ordering gives a connected "
                        "space-time path from the origin departure to the sink"))
    add(Constraint("eq7", "structural", note="exit index = entry index + travel/delta"))
    add(Constraint("eq8", "structural", note="a_ij = entry expression"))
    add(Constraint("eq9", "structural", note="d_ij = entry expression + duration"))
    add(Constraint("eq10", "structural", note="a_j = incoming block exit"))
    add(Constraint("eq11", "structural", note="origin arrival pinned to the timetable"))
    add(Constraint("eq12", "structural", note="d_j = a_j + waiting at j"))

    for t in model.trains:
        plan = model.plans[t.id]
        n = len(t.route)
        # one entry per route block (flowed through eq5's structural note)
        for i in range(n):
            terms = tuple((name, 1.0) for name, _ in _entry_expr(model, t, i))
            add(Constraint("eq5", "row", "E", terms, 1.0,
                           note=f"choose one entry for {t.id}/{t.route[i]}"))
        # eq2: per interval, at most one active arc; emitted over route blocks
        for tau in range(grid.intervals):
            minute = grid.start + tau * grid.delta
            terms = []
            for i in range(n):
                dur = plan.durations[i]
                for e in range(plan.lower[i], plan.upper[i] + 1, grid.delta):
                    if e <= minute < e + dur:
                        var = OccupationVar(t.id, t.route[i], to_interval(e, grid),
                                            to_interval(e + dur, grid))
                        terms.append((var.name(), 1.0))
            if len(terms) > 1:
                add(Constraint("eq2", "row", "L", tuple(terms), 1.0,
                               note=f"{t.id}@{minute}"))
        # eq4: horizon bounds via domain construction
        add(Constraint("eq4", "bound",
                       note=f"{t.id}: entries within [{t.departure}, horizon-slack]"))
        # eq18: ordering with dwell between consecutive blocks
        for i in range(1, n):
            lhs = _entry_expr(model, t, i)
            prev = _entry_expr(model, t, i - 1)
            terms = tuple([(nm, c) for nm, c in lhs] + [(nm, -c) for nm, c in prev])
            add(Constraint("eq18", "row", "G", terms,
                           float(plan.durations[i - 1] + plan.node_dwell[i]),
                           note=f"{t.id}: dwell >= {plan.node_dwell[i]} at "
                                f"{t.stops[i].node}"))
        # eq23/24: entries never precede the initial timetable (domain lower bounds)
        add(Constraint("eq23", "bound", note=f"{t.id}: departures >= initial"))
        add(Constraint("eq24", "bound", note=f"{t.id}: arrivals >= initial"))
        if model.variant == "basic" and t_dis is not None:
            for i in range(n):
                if plan.beta_capped[i]:
                    terms = tuple(_entry_expr(model, t, i))
                    add(Constraint("eq20", "row", "L", terms,
                                   float(plan.initial_entries[i] + model.config.beta),
                                   note=f"{t.id}: delay cap at {t.stops[i].node}"))
                if t.stops[i].depart < thr:
                    add(Constraint("eq21", "bound",
                                   note=f"{t.id}: departure at {t.stops[i].node} frozen"))
                if plan.initial_entries[i] + plan.durations[i] < thr:
                    add(Constraint("eq22", "bound",
                                   note=f"{t.id}: pre-disruption occupation frozen"))
        if model.variant == "adjusted":
            if t.id not in model.affected:
                add(Constraint("eq29", "bound", note=f"{t.id}: departures fixed (not in R*)"))
                add(Constraint("eq30", "bound", note=f"{t.id}: occupations fixed (not in R*)"))
    if not any(r.tag == "eq2" for r in rows):
        add(Constraint("eq2", "structural", note="all domains are singletons"))
    if model.variant == "basic" and t_dis is not None:
        for tag in ("eq20", "eq21", "eq22"):
            if not any(r.tag == tag for r in rows):
                add(Constraint(tag, "structural", note="no applicable index"))
    if model.variant == "adjusted" and model.affected is not None:
        for tag in ("eq29", "eq30"):
            if not any(r.tag == tag for r in rows):
                add(Constraint(tag, "structural", note="R* covers every train"))

    trains_by_id = {t.id: t for t in model.trains}
    # eq13-17: priority completeness + big-M headway on entries and exits
    for a, b, blk in model.sharing_pairs:
        ta, tb = trains_by_id[a], trains_by_id[b]
        block = model.network.blocks[blk]
        same_dir = _direction_on(ta, blk) == _direction_on(tb, blk)
        h = float(block.headway if same_dir else 0)
        p_ab = PriorityVar(a, b, blk).name()
        p_ba = PriorityVar(b, a, blk).name()
        add(Constraint("eq13", "row", "E", ((p_ab, 1.0), (p_ba, 1.0)), 1.0,
                       note=f"{a}/{b} on {blk}"))
        ia = ta.route.index(blk)
        ib = tb.route.index(blk)
        ea = _entry_expr(model, ta, ia)
        eb = _entry_expr(model, tb, ib)
        da = model.plans[a].durations[ia]
        db = model.plans[b].durations[ib]
        m = float(model.big_m)
        for tag, first, second, shift in (
                ("eq14", (ea, p_ab), eb, 0.0),
                ("eq15", (eb, p_ba), ea, 0.0),
                ("eq16", (ea, p_ab), eb, float(db - da)),
                ("eq17", (eb, p_ba), ea, float(da - db))):
            expr, pvar = first
            terms = tuple([(nm, c) for nm, c in expr] +
                          [(nm, -c) for nm, c in second] + [(pvar, m)])
            add(Constraint(tag, "row", "L", terms, m - h + shift,
                           note=f"{a}/{b} on {blk} (h_eff={h:g})"))

    # eq6: opposing conflicts, including the closure extension
    for a, b, blk in model.sharing_pairs:
        ta, tb = trains_by_id[a], trains_by_id[b]
        if _direction_on(ta, blk) == _direction_on(tb, blk):
            continue
        block = model.network.blocks[blk]
        pa, pb = model.plans[a], model.plans[b]
        ia, ib = ta.route.index(blk), tb.route.index(blk)
        for e1 in range(pa.lower[ia], pa.upper[ia] + 1, grid.delta):
            w1 = (e1, e1 + pa.durations[ia])
            for e2 in range(pb.lower[ib], pb.upper[ib] + 1, grid.delta):
                w2 = (e2, e2 + pb.durations[ib])
                if not overlaps(w1[0], w1[1], w2[0], w2[1]):
                    continue
                lo = max(w1[0], w2[0])
                hi = min(w1[1], w2[1])
                dis = model.closures.max_closed_overlap(blk, lo, hi)
                rhs = 1 + (1 if block.tracks == 2 else 0) - dis
                if rhs >= 2:
                    continue  # free double-track operation
                v1 = OccupationVar(a, blk, to_interval(e1, grid),
                                   to_interval(w1[1], grid)).name()
                v2 = OccupationVar(b, blk, to_interval(e2, grid),
                                   to_interval(w2[1], grid)).name()
                add(Constraint("eq6", "row", "L", ((v1, 1.0), (v2, 1.0)),
                               float(max(rhs, 1)), note=f"{a}/{b} on {blk}"))
    if not any(r.tag == "eq6" for r in rows):
        add(Constraint("eq6", "structural", note="no opposing pair shares a block"))
    # closure extension: full closure forbids every overlapping occupation
    for t in model.trains:
        plan = model.plans[t.id]
        for i, blk in enumerate(t.route):
            block = model.network.blocks[blk]
            for c in model.closures.closures_for(blk):
                if c.tracks_closed < block.tracks:
                    continue
                for e in range(plan.lower[i], plan.upper[i] + 1, grid.delta):
                    if overlaps(e, e + plan.durations[i], c.start, c.end):
                        var = OccupationVar(t.id, blk, to_interval(e, grid),
                                            to_interval(e + plan.durations[i], grid))
                        add(Constraint("eq6", "row", "L", ((var.name(), 1.0),), 0.0,
                                       note=f"closure extension {t.id}/{blk}@{e}"))

    # eq19: dwelling capacity over block endpoints (or per node)
    emitted_cap = False
    candidates = _dwell_candidates(model)
    by_node: dict[str, list] = {}
    for c in candidates:
        by_node.setdefault(c[1], []).append(c)

    def emit_capacity(label, node_ids, cap):
        nonlocal emitted_cap
        pool = [c for nid in node_ids for c in by_node.get(nid, [])]
        if len(pool) <= cap:
            return
        presence = [0] * (grid.intervals + 1)
        for c in pool:
            presence[c[2]] += 1
            presence[min(c[3], grid.intervals)] -= 1
        running = 0
        for tau in range(grid.intervals):
            running += presence[tau]
            if running > cap:
                here = [c for c in pool if c[2] <= tau < c[3]]
                terms = tuple((_dwell_indicator_name(c[0], c[1], tau), 1.0)
                              for c in here)
                add(Constraint("eq19", "row", "L", terms, float(cap),
                               note=f"{label} @interval {tau}"))
                emitted_cap = True

    if model.config.capacity_mode == "block":
        for blk in sorted(model.network.blocks):
            block = model.network.blocks[blk]
            emit_capacity(f"block {blk}", sorted(block.endpoints), block.capacity)
    else:
        for nid in sorted(model.network.nodes):
            n = model.network.nodes[nid]
            cap = (n.capacity if n.capacity is not None else
                   max((b.capacity for b in model.network.incident(nid)), default=1))
            emit_capacity(f"node {nid}", [nid], cap)
    if not emitted_cap:
        add(Constraint("eq19", "structural",
                       note="capacity can never bind for these domains"))
    return rows


def _dwell_indicator_name(train: str, node: str, tau: int) -> str:
    return f"z[{train},{node},{tau}]"


def _dwell_candidates(model: RescheduleModel):
    """(train, node, earliest-possible-arrival-interval, latest departure interval)
    for every node at which the train could conceivably be dwelling."""
    cands = []
    grid = model.grid
    for t in model.trains:
        plan = model.plans[t.id]
        n = len(t.route)
        for i in range(n + 1):
            node = t.stops[i].node
            if i == 0:
                arrive_min = t.stops[0].arrive
                depart_max = plan.upper[0] if n else t.stops[0].depart
            elif i == n:
                continue  # the train exits the system at its destination
            else:
                arrive_min = plan.lower[i - 1] + plan.durations[i - 1]
                depart_max = plan.upper[i]
            if depart_max <= arrive_min and i > 0:
                continue
            cands.append((t.id, node, to_interval(arrive_min, grid),
                          to_interval(min(depart_max, grid.end), grid)))
    return cands


def required_tags(variant: str, disrupted: bool) -> set:
    base = {"eq2", "eq3", "eq4", "eq5", "eq6", "eq7", "eq8", "eq9", "eq10",
            "eq11", "eq12", "eq13", "eq14", "eq15", "eq16", "eq17", "eq18",
            "eq19", "eq23", "eq24"}
    if variant == "basic" and disrupted:
        base |= {"eq20", "eq21", "eq22"}
    if variant == "adjusted":
        base |= {"eq29", "eq30"}
    return base
