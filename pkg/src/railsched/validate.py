"""Independent feasibility oracle and delay accounting.

Everything here is recomputed from occupation intervals in absolute minutes —
never from the model module's variables or domains — so model-generation bugs
cannot hide.  Violations are data, not exceptions; an empty report means the
schedule is feasible under the declared variant and configuration.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field, replace
from typing import Optional

from .core import (DisruptionScenario, ModelConfig, overlaps)
from .solution import ScheduleSolution, SolOccupation


@dataclass(frozen=True)
class Violation:
    tag: str  # equation number: "eq2".."eq24", "eq29", "eq30"
    entities: tuple
    window: tuple  # (start minute, end minute) or ()
    measured: object
    required: object
    message: str

    def __str__(self):
        who = ",".join(str(e) for e in self.entities)
        return f"[{self.tag}] {who}: {self.message} (got {self.measured}, need {self.required})"


@dataclass
class ViolationReport:
    violations: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def tags(self) -> set:
        return {v.tag for v in self.violations}

    def add(self, tag, entities, window, measured, required, message):
        self.violations.append(Violation(tag, tuple(entities), tuple(window),
                                         measured, required, message))

    def to_dict(self) -> dict:
        return {"feasible": self.ok,
                "violations": [{"tag": v.tag, "entities": list(v.entities),
                                "window": list(v.window), "measured": str(v.measured),
                                "required": str(v.required), "message": v.message}
                               for v in self.violations]}

    def table(self) -> str:
        if self.ok:
            return "no violations"
        lines = [f"{'tag':6} {'entities':24} detail"]
        for v in self.violations:
            lines.append(f"{v.tag:6} {','.join(map(str, v.entities)):24} {v.message}"
                         f" (got {v.measured}, need {v.required})")
        return "\n".join(lines)


@dataclass(frozen=True)
class TrainDelay:
    train: str
    origin_departure: int
    destination_arrival: int
    initial_travel: int
    rescheduled_travel: int
    delay: int


@dataclass(frozen=True)
class DelayReport:
    per_train: tuple
    objective: int
    total_delay: int

    def to_dict(self) -> dict:
        return {"objective": self.objective, "total_delay": self.total_delay,
                "per_train": [vars(t) for t in self.per_train]}

    def table(self) -> str:
        lines = [f"{'train':8} {'depart':>7} {'arrive':>7} {'initial':>8} "
                 f"{'resched':>8} {'delay':>6}"]
        for t in self.per_train:
            lines.append(f"{t.train:8} {t.origin_departure:7d} "
                         f"{t.destination_arrival:7d} {t.initial_travel:8d} "
                         f"{t.rescheduled_travel:8d} {t.delay:6d}")
        lines.append(f"{'total':8} {'':7} {'':7} {'':8} {self.objective:8d} "
                     f"{self.total_delay:6d}")
        return "\n".join(lines)


def _direction(occ: SolOccupation) -> tuple:
    return (occ.from_node, occ.to_node)


def _train_structure(report, train, occs, network, grid):
    """Route conformance, contiguity, durations, horizon, grid: eqs 2-5, 7, 11."""
    t = train
    if not occs:
        if t.route:
            report.add("eq5", (t.id,), (), 0, len(t.route), "no occupations at all")
        return
    for o in occs:
        for minute in (o.entry, o.exit):
            if not grid.is_aligned(minute):
                report.add("eq4", (t.id, o.arc), (o.entry, o.exit), minute,
                           f"multiple of {grid.delta}", "off-grid occupation")
        if o.entry < grid.start or o.exit > grid.end:
            report.add("eq4", (t.id, o.arc), (o.entry, o.exit),
                       (o.entry, o.exit), (grid.start, grid.end),
                       "occupation outside the horizon")
        if o.exit <= o.entry:
            report.add("eq5", (t.id, o.arc), (o.entry, o.exit), o.exit - o.entry,
                       "> 0", "empty or inverted occupation")
    # per-train single occupancy (eq2): half-open windows must not overlap
    ordered = sorted(occs, key=lambda o: (o.entry, o.exit))
    for a, b in zip(ordered, ordered[1:]):
        if overlaps(a.entry, a.exit, b.entry, b.exit):
            report.add("eq2", (t.id, a.arc, b.arc), (b.entry, a.exit),
                       f"{a.arc}&{b.arc}", "one arc per interval",
                       "two arcs occupied simultaneously")
    # route confinement (eq3) and contiguity (eq5)
    blocks_in_order = [o for o in ordered if not o.is_wait]
    expected = list(t.route)
    if [o.arc for o in blocks_in_order] != expected:
        report.add("eq3", (t.id,), (), [o.arc for o in blocks_in_order], expected,
                   "occupied blocks differ from the route")
        return
    if ordered[0].entry != t.stops[0].arrive:
        report.add("eq11", (t.id, t.origin), (ordered[0].entry,),
                   ordered[0].entry, t.stops[0].arrive,
                   "presence at the origin does not match the initial arrival")
    pos = ordered[0].entry
    at = t.origin
    for o in ordered:
        if o.entry != pos:
            report.add("eq5", (t.id, o.arc), (pos, o.entry), o.entry, pos,
                       "gap or overlap in the space-time path")
        if o.is_wait:
            if o.from_node != at:
                report.add("eq5", (t.id, o.arc), (o.entry, o.exit), o.from_node, at,
                           "waiting at a node the train is not at")
        else:
            if o.from_node != at:
                report.add("eq5", (t.id, o.arc), (o.entry, o.exit), o.from_node, at,
                           "block entered from the wrong side")
            blk = network.blocks.get(o.arc)
            if blk is not None and o.exit - o.entry != blk.travel_time:
                report.add("eq7", (t.id, o.arc), (o.entry, o.exit), o.exit - o.entry,
                           blk.travel_time, "traversal duration differs from block time")
            at = o.to_node
        pos = o.exit
    if at != t.destination:
        report.add("eq5", (t.id,), (), at, t.destination,
                   "path does not end at the destination")


def _node_events(train, occs):
    """(node, arrive, depart) per visited node, derived purely from occupations."""
    ordered = sorted(occs, key=lambda o: (o.entry, o.exit))
    events = []
    if not ordered:
        return events
    arrive = ordered[0].entry
    at = ordered[0].from_node
    for o in ordered:
        if o.is_wait:
            continue
        events.append((o.from_node, arrive, o.entry))
        arrive = o.exit
        at = o.to_node
    events.append((at, arrive, arrive))
    return events


def check(schedule: ScheduleSolution, instance, scenario: DisruptionScenario,
          config: ModelConfig) -> ViolationReport:
    """Re-check a proposed schedule against every semantic rule, from scratch."""
    network, trains, grid = instance
    report = ViolationReport()
    all_trains = {t.id: t for t in trains}
    for tid in schedule.occupations:
        if tid not in all_trains:
            report.add("eq3", (tid,), (), tid, "known train",
                       "schedule references an unknown train")
    trains = [all_trains[tid] for tid in schedule.occupations if tid in all_trains]

    for t in trains:
        _train_structure(report, t, schedule.occupations[t.id], network, grid)

    events = {t.id: _node_events(t, schedule.occupations[t.id]) for t in trains}
    initial_dep = {t.id: {s.node: s.depart for s in t.stops} for t in trains}
    initial_arr = {t.id: {s.node: s.arrive for s in t.stops} for t in trains}

    # eq18 dwell minimums; eq23/24 no early running
    for t in trains:
        for node, arrive, depart in events[t.id]:
            n = network.nodes.get(node)
            if n is None:
                continue
            is_terminal = node == t.destination
            if not is_terminal and depart - arrive < n.dwell_min:
                report.add("eq18", (t.id, node), (arrive, depart), depart - arrive,
                           n.dwell_min, "dwell below the station minimum")
            if node in initial_arr[t.id] and arrive < initial_arr[t.id][node]:
                report.add("eq24", (t.id, node), (arrive,), arrive,
                           initial_arr[t.id][node], "arrival earlier than the timetable")
            if (not is_terminal and node in initial_dep[t.id]
                    and depart < initial_dep[t.id][node]):
                report.add("eq23", (t.id, node), (depart,), depart,
                           initial_dep[t.id][node], "departure earlier than the timetable")

    # block sharing: headway + priority completeness (eq13-17), opposing (eq6)
    by_block: dict = {}
    for t in trains:
        for o in schedule.occupations[t.id]:
            if not o.is_wait and o.arc in network.blocks:
                by_block.setdefault(o.arc, []).append((t.id, o))
    declared = {}
    for p in schedule.priorities:
        declared[(p[0], p[1], p[2])] = True
    for blk_id, users in sorted(by_block.items()):
        blk = network.blocks[blk_id]
        for i in range(len(users)):
            for j in range(i + 1, len(users)):
                (ka, oa), (kb, ob) = users[i], users[j]
                if ka == kb:
                    continue
                same_dir = _direction(oa) == _direction(ob)
                ab = declared.get((ka, kb, blk_id), False)
                ba = declared.get((kb, ka, blk_id), False)
                if schedule.priorities and ab == ba:
                    report.add("eq13", (ka, kb, blk_id), (), f"p_ab={ab},p_ba={ba}",
                               "exactly one", "priority pair is not complete")
                if schedule.priorities and (ab or ba):
                    first_occ, second_occ = (oa, ob) if ab else (ob, oa)
                    names = (ka, kb) if ab else (kb, ka)
                    h = blk.headway if same_dir else 0
                    if second_occ.entry - first_occ.entry < h:
                        report.add("eq14", (*names, blk_id),
                                   (first_occ.entry, second_occ.entry),
                                   second_occ.entry - first_occ.entry, h,
                                   "entry headway violates the declared priority")
                    if second_occ.exit - first_occ.exit < h:
                        report.add("eq16", (*names, blk_id),
                                   (first_occ.exit, second_occ.exit),
                                   second_occ.exit - first_occ.exit, h,
                                   "exit headway violates the declared priority")
                if same_dir:
                    h = blk.headway
                    if abs(oa.entry - ob.entry) < h:
                        report.add("eq15", (ka, kb, blk_id), (oa.entry, ob.entry),
                                   abs(oa.entry - ob.entry), h,
                                   "same-direction entry headway")
                    if abs(oa.exit - ob.exit) < h:
                        report.add("eq17", (ka, kb, blk_id), (oa.exit, ob.exit),
                                   abs(oa.exit - ob.exit), h,
                                   "same-direction exit headway")
                    if ((oa.entry - ob.entry) * (oa.exit - ob.exit)) < 0:
                        report.add("eq13", (ka, kb, blk_id), (), "order swap",
                                   "FIFO", "overtaking inside a block")
                else:
                    if blk.tracks == 1 and overlaps(oa.entry, oa.exit, ob.entry, ob.exit):
                        report.add("eq6", (ka, kb, blk_id),
                                   (max(oa.entry, ob.entry), min(oa.exit, ob.exit)),
                                   "overlap", "exclusion",
                                   "opposing trains share a single-track block")

    # closures: eq6 extension (full) and single-tracking (partial)
    for c in scenario.closures:
        blk = network.blocks.get(c.block)
        if blk is None:
            continue
        users = by_block.get(c.block, [])
        full = c.tracks_closed >= blk.tracks
        if full:
            for tid, o in users:
                if overlaps(o.entry, o.exit, c.start, c.end):
                    report.add("eq6", (tid, c.block), c.window(),
                               (o.entry, o.exit), f"clear of {c.window()}",
                               "occupation of a fully closed block")
        elif blk.tracks == 2 and c.tracks_closed == 1:
            for i in range(len(users)):
                for j in range(i + 1, len(users)):
                    (ka, oa), (kb, ob) = users[i], users[j]
                    if _direction(oa) == _direction(ob):
                        continue
                    lo = max(oa.entry, ob.entry, c.start)
                    hi = min(oa.exit, ob.exit, c.end)
                    if lo < hi:
                        report.add("eq6", (ka, kb, c.block), (lo, hi), "overlap",
                                   "single-track operation",
                                   "opposing trains overlap on a half-closed block")

    # eq19 capacity: dwelling trains over block endpoints (or per node)
    dwells: dict = {}
    for t in trains:
        for o in schedule.occupations[t.id]:
            if o.is_wait:
                dwells.setdefault(o.from_node, []).append((t.id, o.entry, o.exit))
    ticks = sorted({m for lst in dwells.values() for _, a, b in lst for m in (a, b)})
    if config.capacity_mode == "block":
        for blk in network.blocks.values():
            pool = [(tid, a, b) for nid in blk.endpoints
                    for tid, a, b in dwells.get(nid, [])]
            for tick in ticks:
                here = [tid for tid, a, b in pool if a <= tick < b]
                if len(here) > blk.capacity:
                    report.add("eq19", (blk.id, *sorted(here)), (tick, tick + grid.delta),
                               len(here), blk.capacity,
                               "too many trains dwelling at the block endpoints")
                    break
    else:
        for nid, pool in dwells.items():
            n = network.nodes[nid]
            cap = (n.capacity if n.capacity is not None else
                   max((b.capacity for b in network.incident(nid)), default=1))
            for tick in ticks:
                here = [tid for tid, a, b in pool if a <= tick < b]
                if len(here) > cap:
                    report.add("eq19", (nid, *sorted(here)), (tick, tick + grid.delta),
                               len(here), cap, "too many trains dwelling at the node")
                    break

    # divergence-from-timetable families
    t_dis = scenario.start()
    if config.variant == "basic" and t_dis is not None:
        thr = t_dis - config.beta
        for t in trains:
            for node, arrive, depart in events[t.id]:
                if node == t.destination or node not in initial_dep[t.id]:
                    continue
                d0 = initial_dep[t.id][node]
                if d0 >= t_dis and depart - d0 > config.beta:
                    report.add("eq20", (t.id, node), (depart,), depart - d0,
                               config.beta, "delay cap exceeded")
                if d0 < thr and depart != d0:
                    report.add("eq21", (t.id, node), (depart,), depart, d0,
                               "pre-disruption departure was moved")
            initial_occ = {(o.block, o.entry, o.exit) for o in t.occupations()}
            actual_occ = {(o.arc, o.entry, o.exit)
                          for o in schedule.occupations[t.id] if not o.is_wait}
            for blk, e, x in initial_occ - actual_occ:
                if x < thr:
                    report.add("eq22", (t.id, blk), (e, x), "moved", "frozen",
                               "pre-disruption occupation was dropped")
            for blk, e, x in actual_occ - initial_occ:
                if x < thr:
                    report.add("eq22", (t.id, blk), (e, x), "new", "frozen",
                               "new occupation inside the frozen zone")
    if config.variant == "adjusted":
        affected = schedule.stats.get("affected")
        if affected is None:
            from .model import identify_affected
            affected = identify_affected(instance.trains, scenario, config.beta, network)
        affected = set(affected)
        for t in trains:
            if t.id in affected:
                continue
            want = [(o.block, o.entry, o.exit) for o in t.occupations()]
            got = [(o.arc, o.entry, o.exit)
                   for o in sorted(schedule.occupations[t.id], key=lambda o: o.entry)
                   if not o.is_wait]
            if want != got:
                report.add("eq30", (t.id,), (), got, want,
                           "unaffected train deviates from the timetable")
            for node, arrive, depart in events[t.id]:
                if node != t.destination and node in initial_dep[t.id] \
                        and depart != initial_dep[t.id][node]:
                    report.add("eq29", (t.id, node), (depart,), depart,
                               initial_dep[t.id][node],
                               "unaffected train departure was moved")
    return report


def delays(schedule: ScheduleSolution, instance) -> DelayReport:
    """Per-train travel and delay accounting; totals satisfy the delay identity."""
    network, trains, grid = instance
    rows = []
    objective = 0
    total = 0
    by_id = {t.id: t for t in trains}
    for tid in sorted(schedule.occupations, key=lambda x: (len(x), x)):
        t = by_id[tid]
        ev = _node_events(t, schedule.occupations[tid])
        arrive_dest = ev[-1][1] if ev else t.stops[-1].arrive
        depart_origin = next((d for n, a, d in ev if n == t.origin), t.departure)
        initial = t.stops[-1].arrive - t.stops[0].arrive
        actual = arrive_dest - t.stops[0].arrive
        rows.append(TrainDelay(train=tid, origin_departure=depart_origin,
                               destination_arrival=arrive_dest,
                               initial_travel=initial, rescheduled_travel=actual,
                               delay=arrive_dest - t.stops[-1].arrive))
        objective += actual
        total += arrive_dest - t.stops[-1].arrive
    return DelayReport(per_train=tuple(rows), objective=objective, total_delay=total)


def _shift_occupation(occs, index, delta_entry, delta_exit=None):
    delta_exit = delta_entry if delta_exit is None else delta_exit
    out = list(occs)
    o = out[index]
    out[index] = SolOccupation(o.arc, o.from_node, o.to_node,
                               o.entry + delta_entry, o.exit + delta_exit)
    return tuple(out)


def mutate_and_check(schedule: ScheduleSolution, instance,
                     scenario: DisruptionScenario, config: ModelConfig,
                     seed: int = 0) -> list:
    """Validator self-test: targeted single-field perturbations of a feasible
    schedule.  Each entry is (mutation name, intended rule tags, report); every
    applicable mutation must yield a non-empty report naming an intended tag,
    which is asserted here.
    """
    network, trains, grid = instance
    rng = random.Random(seed)
    delta = grid.delta
    results = []

    def trial(name, intended, mutated):
        rep = check(mutated, instance, scenario, config)
        assert not rep.ok, f"mutation {name} went undetected"
        assert rep.tags() & intended, \
            f"mutation {name}: expected one of {intended}, got {rep.tags()}"
        results.append((name, intended, rep))

    def with_occ(tid, occs):
        occupations = dict(schedule.occupations)
        occupations[tid] = occs
        return replace(schedule, occupations=occupations)

    candidates = sorted(tid for tid, occ in schedule.occupations.items() if occ)
    rng.shuffle(candidates)
    tid = next(t for t in candidates
               if any(not o.is_wait for o in schedule.occupations[t]))
    occs = schedule.occupations[tid]
    first = next(i for i, o in enumerate(occs) if not o.is_wait)
    o = occs[first]

    trial("shift-origin-early", {"eq11", "eq23", "eq24"},
          with_occ(tid, _shift_occupation(occs, first, -delta)))
    trial("stretch-traversal", {"eq7"},
          with_occ(tid, _shift_occupation(occs, first, 0, delta)))
    trial("off-route-arc", {"eq3"},
          with_occ(tid, occs[:first] + (SolOccupation(
              "__offroute__", o.from_node, o.to_node, o.entry, o.exit),)
              + occs[first + 1:]))
    trial("teleport-gap", {"eq5", "eq3"}, with_occ(tid, occs[:first] + occs[first + 1:]))
    trial("double-occupancy", {"eq2"}, with_occ(tid, occs + (o,)))
    trial("beyond-horizon", {"eq4"},
          with_occ(tid, _shift_occupation(occs, first, grid.horizon)))

    if schedule.priorities:
        p = schedule.priorities[0]
        swapped = ((p[1], p[0], p[2]),) + tuple(schedule.priorities[1:])
        trial("swap-priority", {"eq13", "eq14", "eq15", "eq16", "eq17"},
              replace(schedule, priorities=swapped))

    # shrink a dwell below the station minimum: pull the departing block early
    for cand in candidates:
        cocc = schedule.occupations[cand]
        done = False
        for i, oc in enumerate(cocc):
            if oc.is_wait or i == 0:
                continue
            node = oc.from_node
            dt = network.nodes[node].dwell_min
            prev_exit = max((p.exit for p in cocc
                             if not p.is_wait and p.to_node == node), default=None)
            if dt > 0 and prev_exit is not None and oc.entry - prev_exit < dt + delta:
                trial("shrink-dwell", {"eq18"},
                      with_occ(cand, _shift_occupation(
                          cocc, i, -(oc.entry - prev_exit - dt + delta), 0)))
                done = True
                break
        if done:
            break

    # same-direction headway: squeeze the tightest follower pair by one tick
    tight = None
    by_block: dict = {}
    for t2 in candidates:
        for i, o2 in enumerate(schedule.occupations[t2]):
            if not o2.is_wait and o2.arc in network.blocks:
                by_block.setdefault(o2.arc, []).append((t2, i, o2))
    for blk_id, users in sorted(by_block.items()):
        h = network.blocks[blk_id].headway
        if h <= 0:
            continue
        for a in users:
            for b in users:
                if a[0] == b[0] or _direction(a[2]) != _direction(b[2]):
                    continue  # headway squeeze targets same-direction followers
                gap = b[2].entry - a[2].entry
                if gap >= h and (tight is None or gap < tight[0]):
                    tight = (gap, b, h)
    if tight is not None:
        gap, (t2, i, o2), h = tight
        trial("squeeze-headway", {"eq14", "eq15", "eq16", "eq17"},
              with_occ(t2, _shift_occupation(schedule.occupations[t2], i,
                                             -(gap - h + delta))))

    # opposing conflict on a single-track block
    placed = False
    for blk_id, users in sorted(by_block.items()):
        if network.blocks[blk_id].tracks != 1:
            continue
        for a in users:
            for b in users:
                if a[0] == b[0] or _direction(a[2]) == _direction(b[2]):
                    continue
                shift = a[2].entry - b[2].entry
                trial("opposing-overlap", {"eq6"},
                      with_occ(b[0], _shift_occupation(schedule.occupations[b[0]],
                                                       b[1], shift)))
                placed = True
                break
            if placed:
                break
        if placed:
            break

    # move an occupation into a closure window
    for c in scenario.closures:
        users = by_block.get(c.block, [])
        blk = network.blocks[c.block]
        for t2, i, o2 in users:
            if c.tracks_closed < blk.tracks and c.direction is not None \
                    and _direction(o2) != tuple(c.direction):
                continue
            if not overlaps(o2.entry, o2.exit, c.start, c.end):
                shift = c.start - o2.entry
                trial("enter-closure", {"eq6"},
                      with_occ(t2, _shift_occupation(schedule.occupations[t2],
                                                     i, shift)))
                break
        else:
            continue
        break

    # overfill a block's dwelling capacity with synthetic holds
    blk = min(network.blocks.values(), key=lambda b: (b.capacity, b.id))
    node = blk.a
    packed = dict(schedule.occupations)
    crowd = candidates[:blk.capacity + 1]
    if len(crowd) > blk.capacity:
        for t2 in crowd:
            packed[t2] = schedule.occupations[t2] + (
                SolOccupation(node, node, node, grid.start, grid.start + delta),)
        trial("overfill-capacity", {"eq19"}, replace(schedule, occupations=packed))

    t_dis = scenario.start()
    if config.variant == "basic" and t_dis is not None:
        # blow through the per-node delay cap
        for cand in candidates:
            t2 = next(t for t in trains if t.id == cand)
            cocc = schedule.occupations[cand]
            done = False
            for i, oc in enumerate(cocc):
                if oc.is_wait:
                    continue
                d0 = next((s.depart for s in t2.stops if s.node == oc.from_node), None)
                if d0 is not None and d0 >= t_dis:
                    trial("exceed-beta", {"eq20"},
                          with_occ(cand, _shift_occupation(
                              cocc, i, d0 + config.beta + delta - oc.entry)))
                    done = True
                    break
            if done:
                break
        # touch a frozen pre-disruption departure
        thr = t_dis - config.beta
        for cand in candidates:
            t2 = next(t for t in trains if t.id == cand)
            cocc = schedule.occupations[cand]
            done = False
            for i, oc in enumerate(cocc):
                if oc.is_wait:
                    continue
                d0 = next((s.depart for s in t2.stops if s.node == oc.from_node), None)
                if d0 is not None and d0 < thr:
                    trial("move-frozen-departure", {"eq21", "eq22"},
                          with_occ(cand, _shift_occupation(cocc, i, delta)))
                    done = True
                    break
            if done:
                break
    if config.variant == "adjusted":
        from .model import identify_affected
        affected = identify_affected(trains, scenario, config.beta, network)
        for cand in candidates:
            if cand in affected:
                continue
            cocc = schedule.occupations[cand]
            idx = next((i for i, oc in enumerate(cocc) if not oc.is_wait), None)
            if idx is not None:
                trial("move-unaffected-train", {"eq29", "eq30"},
                      with_occ(cand, _shift_occupation(cocc, idx, delta)))
                break
    return results
