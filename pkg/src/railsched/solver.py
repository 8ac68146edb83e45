"""Exact optimization of a RescheduleModel.

`solve` runs a chronological depth-first branch-and-bound over block entry
times: the branching variable is always the globally earliest unfixed entry,
values are tried at the train's initial time first and then ascending, and the
bound is the sum of earliest feasible destination arrivals given the current
domains (admissible: waiting only pushes arrivals later).  The search is
sequential and deterministic; with value order fixed, the first optimum found
is the lexicographically smallest one.

`brute_force` is the independent oracle: exhaustive enumeration over small
models, sharing none of the search or propagation code.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace

from .core import InstanceError, Instance, overlaps
from .model import RescheduleModel
from .solution import ScheduleSolution, schedule_from_entries
from .validate import check as validate_check

from .mps import export_mps  # re-export; the writer lives in its own file

__all__ = ["solve", "brute_force", "export_mps", "SolverTimeout", "SearchStats",
           "ScheduleSolution", "BruteForceCapError"]


class SolverTimeout(TimeoutError):
    """Budget exhausted before any incumbent existed."""


class BruteForceCapError(ValueError):
    """Instance exceeds the enumeration caps of the brute-force oracle."""


@dataclass
class SearchStats:
    nodes: int = 0
    prunes: int = 0
    incumbents: int = 0
    wall_ms: float = 0.0
    dead_end_tags: set = field(default_factory=set)

    def as_dict(self):
        return {"nodes": self.nodes, "prunes": self.prunes,
                "incumbents": self.incumbents, "wall_ms": round(self.wall_ms, 3)}


class _TrainState:
    """Mutable per-train search view over the immutable TrainPlan."""

    __slots__ = ("tid", "plan", "train", "blocks", "dirs", "n", "entries", "fixed",
                 "dest_dwell")

    def __init__(self, train, plan, network):
        self.tid = train.id
        self.plan = plan
        self.train = train
        self.blocks = [network.blocks[b] for b in train.route]
        occ = train.occupations()
        self.dirs = [(o.from_node, o.to_node) for o in occ]
        self.n = len(train.route)
        self.entries = [None] * self.n
        self.fixed = 0
        self.dest_dwell = 0


def _closed_for(model, state, i, entry):
    """Entry forbidden because the block is fully closed over the window."""
    blk = state.blocks[i]
    exit_ = entry + blk.travel_time
    for c in model.closures.closures_for(blk.id):
        if c.tracks_closed >= blk.tracks and overlaps(entry, exit_, c.start, c.end):
            return c.end  # earliest minute from which the window no longer bites
    return None


def _next_open(model, state, i, entry):
    """Smallest admissible entry >= `entry` w.r.t. full closures."""
    while True:
        bound = _closed_for(model, state, i, entry)
        if bound is None:
            return entry
        entry = bound


def _earliest_arrival(model, state, lowers):
    """Earliest destination arrival for one train given per-block lower bounds."""
    pos = None
    for i in range(state.n):
        lo = lowers[i] if state.entries[i] is None else state.entries[i]
        if pos is not None:
            lo = max(lo, pos + state.plan.node_dwell[i])
        if state.entries[i] is None:
            lo = _next_open(model, state, i, lo)
            if lo > state.plan.upper[i]:
                return None
        pos = lo + state.blocks[i].travel_time
    if pos is None:
        pos = state.train.stops[0].arrive
    return pos


def solve(model: RescheduleModel, budget: float = 300.0, threads: int = 1,
          validate_each_incumbent: bool = False) -> ScheduleSolution:
    """Exact branch-and-bound; returns an optimal, validator-clean schedule.

    `threads` is validated for interface compatibility; the search itself is
    sequential, which keeps results deterministic.  With
    `validate_each_incumbent` every incumbent found during search is replayed
    through the independent validator (slow; used by the test suite).
    """
    if threads < 1:
        raise ValueError("threads must be >= 1")
    t0 = time.monotonic()
    stats = SearchStats()
    network = model.network
    grid = model.grid
    states = [_TrainState(t, model.plans[t.id], network) for t in model.trains]
    order = {s.tid: k for k, s in enumerate(states)}
    delta = grid.delta

    # static per-train infeasibility (frozen into a full closure, beta too tight)
    for s in states:
        for i in range(s.n):
            if s.plan.frozen[i]:
                bar = _closed_for(model, s, i, s.plan.initial_entries[i])
                if bar is not None:
                    stats.dead_end_tags |= ({"eq21", "eq22", "eq6"}
                                            if model.variant == "basic"
                                            else {"eq29", "eq30", "eq6"})
                    return _infeasible(model, stats, t0)
        lowers = list(s.plan.lower)
        if _earliest_arrival(model, s, lowers) is None:
            stats.dead_end_tags |= {"eq20", "eq4", "eq6"}
            return _infeasible(model, stats, t0)

    by_block_fixed: dict = {}  # block id -> list of (state, i) already fixed
    dwells: dict = {}  # node -> list of (tid, start, end)
    incumbent: dict = {}
    incumbent_obj = [None]

    base_arrive = {s.tid: s.train.stops[0].arrive for s in states}

    def pair_ok(state, i, entry):
        """Check the candidate against every already-fixed occupation."""
        blk = state.blocks[i]
        exit_ = entry + blk.travel_time
        direction = state.dirs[i]
        for other, j in by_block_fixed.get(blk.id, ()):
            if other is state:
                continue
            oe = other.entries[j]
            ox = oe + blk.travel_time
            if other.dirs[j] == direction:
                h = blk.headway
                if abs(entry - oe) < h or abs(exit_ - ox) < h:
                    stats.dead_end_tags.add("eq14")
                    return False
                if (entry - oe) * (exit_ - ox) < 0:
                    stats.dead_end_tags.add("eq13")
                    return False
            else:
                if blk.tracks == 1 and overlaps(entry, exit_, oe, ox):
                    stats.dead_end_tags.add("eq6")
                    return False
                if blk.tracks == 2 and overlaps(entry, exit_, oe, ox):
                    lo, hi = max(entry, oe), min(exit_, ox)
                    if model.closures.max_closed_overlap(blk.id, lo, hi) >= 1:
                        stats.dead_end_tags.add("eq6")
                        return False
        return True

    def capacity_ok(tid, node, start, end):
        if start >= end:
            return True
        if model.config.capacity_mode == "block":
            for blk in network.incident(node):
                pool = [iv for nid in blk.endpoints for iv in dwells.get(nid, ())]
                pool = pool + [(tid, start, end)]
                ticks = sorted({p[1] for p in pool})
                for tick in ticks:
                    if sum(1 for _, a, b in pool if a <= tick < b) > blk.capacity:
                        stats.dead_end_tags.add("eq19")
                        return False
        else:
            n = network.nodes[node]
            cap = (n.capacity if n.capacity is not None else
                   max((b.capacity for b in network.incident(node)), default=1))
            pool = list(dwells.get(node, ())) + [(tid, start, end)]
            ticks = sorted({p[1] for p in pool})
            for tick in ticks:
                if sum(1 for _, a, b in pool if a <= tick < b) > cap:
                    stats.dead_end_tags.add("eq19")
                    return False
        return True

    def wait_window(state, i, entry):
        """Dwell interval at the node ahead of block i for a candidate entry."""
        if i == 0:
            return (state.train.stops[0].node, state.train.stops[0].arrive, entry)
        prev_exit = state.entries[i - 1] + state.blocks[i - 1].travel_time
        return (state.train.stops[i].node, prev_exit, entry)

    def lower_bound(lowers_map):
        total = 0
        for s in states:
            arr = _earliest_arrival(model, s, lowers_map[s.tid])
            if arr is None:
                return None
            total += arr - base_arrive[s.tid]
        return total

    def snapshot_entries():
        return {s.tid: list(s.entries) for s in states}

    deadline = t0 + budget
    lowers_map = {s.tid: list(s.plan.lower) for s in states}

    def dfs():
        stats.nodes += 1
        if stats.nodes % 256 == 0 and time.monotonic() > deadline:
            raise _Budget()
        # pick the chronologically earliest unfixed entry (ties: train order)
        best = None
        for s in states:
            if s.fixed == s.n:
                continue
            i = s.fixed
            lo = lowers_map[s.tid][i]
            if s.entries[i] is None:
                key = (lo, order[s.tid])
                if best is None or key < best[0]:
                    best = (key, s, i, lo)
        if best is None:
            obj = sum(s.entries[-1] + s.blocks[-1].travel_time - base_arrive[s.tid]
                      if s.n else 0 for s in states)
            if incumbent_obj[0] is None or obj < incumbent_obj[0]:
                incumbent_obj[0] = obj
                incumbent.clear()
                incumbent.update(snapshot_entries())
                stats.incumbents += 1
                if validate_each_incumbent:
                    probe = schedule_from_entries(model.trains, model.network,
                                                  snapshot_entries())
                    if model.affected is not None:
                        probe = replace(probe,
                                        stats={"affected": sorted(model.affected)})
                    rep = validate_check(probe,
                                         Instance(model.network, model.trains, grid),
                                         model.scenario, model.config)
                    assert rep.ok, "incumbent failed validation:\n" + rep.table()
            return
        _, s, i, lo = best
        plan = s.plan
        e = lo
        while e <= plan.upper[i]:
            e = _next_open(model, s, i, e)
            if e > plan.upper[i]:
                stats.dead_end_tags.add("eq6")
                break
            node, wstart, wend = wait_window(s, i, e)
            feasible = pair_ok(s, i, e) and capacity_ok(s.tid, node, wstart, wend)
            if feasible:
                s.entries[i] = e
                s.fixed += 1
                by_block_fixed.setdefault(s.blocks[i].id, []).append((s, i))
                had_wait = wend > wstart
                if had_wait:
                    dwells.setdefault(node, []).append((s.tid, wstart, wend))
                old_lo = lowers_map[s.tid][i]
                lowers_map[s.tid][i] = e
                nxt_changed = False
                if i + 1 < s.n:
                    want = e + s.blocks[i].travel_time + plan.node_dwell[i + 1]
                    if lowers_map[s.tid][i + 1] < want:
                        old_next = lowers_map[s.tid][i + 1]
                        lowers_map[s.tid][i + 1] = want
                        nxt_changed = True
                bound = lower_bound(lowers_map)
                if bound is not None and (incumbent_obj[0] is None
                                          or bound < incumbent_obj[0]):
                    dfs()
                else:
                    stats.prunes += 1
                    if bound is None:
                        stats.dead_end_tags.add("eq4")
                if nxt_changed:
                    lowers_map[s.tid][i + 1] = old_next
                lowers_map[s.tid][i] = old_lo
                if had_wait:
                    dwells[node].pop()
                by_block_fixed[s.blocks[i].id].pop()
                s.fixed -= 1
                s.entries[i] = None
            if plan.frozen[i]:
                break
            e += delta
            # bounding: the branch value only worsens this train's arrival; stop
            # once even the relaxation cannot beat the incumbent
            if incumbent_obj[0] is not None:
                trial = lowers_map[s.tid][i]
                lowers_map[s.tid][i] = e
                bnd = lower_bound(lowers_map)
                lowers_map[s.tid][i] = trial
                if bnd is None or bnd >= incumbent_obj[0]:
                    stats.prunes += 1
                    break

    class _Budget(Exception):
        pass

    timed_out = False
    try:
        dfs()
    except _Budget:
        timed_out = True

    stats.wall_ms = (time.monotonic() - t0) * 1000.0
    if incumbent_obj[0] is None:
        if timed_out:
            raise SolverTimeout(f"budget {budget}s exhausted with no incumbent")
        return _infeasible(model, stats, t0)
    solution = _finish(model, incumbent, stats,
                       "timeout-with-incumbent" if timed_out else "optimal")
    if timed_out:
        for s in states:
            s.entries = [None] * s.n
            s.fixed = 0
        root = lower_bound({s.tid: list(s.plan.lower) for s in states})
        solution = replace(solution,
                           gap=None if root is None else solution.objective - root)
    return solution


def _infeasible(model, stats, t0):
    stats.wall_ms = (time.monotonic() - t0) * 1000.0
    return ScheduleSolution(occupations={}, priorities=(), node_times={},
                            block_times={}, objective=0, total_delay=0,
                            status="infeasible",
                            certificate=tuple(sorted(stats.dead_end_tags)),
                            stats=stats.as_dict())


def _finish(model, entries, stats, status) -> ScheduleSolution:
    sol = schedule_from_entries(model.trains, model.network, entries)
    extra = dict(stats.as_dict())
    if model.affected is not None:
        extra["affected"] = sorted(model.affected)
    out = ScheduleSolution(occupations=sol.occupations, priorities=sol.priorities,
                           node_times=sol.node_times, block_times=sol.block_times,
                           objective=sol.objective,
                           total_delay=sol.objective - model.baseline,
                           status=status, stats=extra)
    if status == "optimal":
        report = validate_check(out, Instance(model.network, model.trains, model.grid),
                                model.scenario, model.config)
        if not report.ok:
            raise AssertionError(
                "solver produced an invalid optimum:\n" + report.table())
    return out


# ---------------------------------------------------------------------------
# independent exhaustive oracle

BRUTE_MAX_TRAINS = 3
BRUTE_MAX_BLOCKS = 5
BRUTE_MAX_INTERVALS = 16


def brute_force(model: RescheduleModel, max_trains: int = BRUTE_MAX_TRAINS,
                max_blocks: int = BRUTE_MAX_BLOCKS,
                max_intervals: int = BRUTE_MAX_INTERVALS) -> ScheduleSolution:
    """Exhaustive enumeration of every entry-time assignment within hard caps.

    Feasibility of complete assignments is judged by the independent validator,
    so no search/propagation code is shared with `solve`.
    """
    if len(model.trains) > max_trains:
        raise BruteForceCapError(f"more than {max_trains} trains")
    if len(model.network.blocks) > max_blocks:
        raise BruteForceCapError(f"more than {max_blocks} blocks")
    if model.grid.intervals > max_intervals:
        raise BruteForceCapError(f"more than {max_intervals} intervals")

    grid = model.grid
    instance = Instance(model.network, model.trains, grid)
    per_train: list = []
    for t in model.trains:
        plan = model.plans[t.id]
        vectors: list = [[]]
        for i in range(len(t.route)):
            dur = plan.durations[i]
            dwell = plan.node_dwell[i]
            grown = []
            for vec in vectors:
                floor = plan.lower[i]
                if vec:
                    floor = max(floor, vec[-1] + plan.durations[i - 1] + dwell)
                for e in range(floor, plan.upper[i] + 1, grid.delta):
                    grown.append(vec + [e])
            vectors = grown
        per_train.append((t.id, vectors))

    best: list = [None, None]  # objective, entries

    def walk(idx, chosen):
        if idx == len(per_train):
            entries = dict(chosen)
            candidate = schedule_from_entries(model.trains, model.network, entries)
            if model.affected is not None:
                candidate = replace(candidate,
                                    stats={"affected": sorted(model.affected)})
            report = validate_check(candidate, instance, model.scenario, model.config)
            if report.ok:
                obj = candidate.objective
                key = (obj, tuple(sorted((tid, tuple(v)) for tid, v in entries.items())))
                if best[0] is None or key < best[0]:
                    best[0] = key
                    best[1] = entries
            return
        tid, vectors = per_train[idx]
        for vec in vectors:
            chosen.append((tid, vec))
            walk(idx + 1, chosen)
            chosen.pop()

    walk(0, [])
    if best[0] is None:
        return ScheduleSolution(occupations={}, priorities=(), node_times={},
                                block_times={}, objective=0, total_delay=0,
                                status="infeasible", certificate=("enumeration",))
    sol = schedule_from_entries(model.trains, model.network, best[1])
    extra = {"method": "brute-force"}
    if model.affected is not None:
        extra["affected"] = sorted(model.affected)
    return ScheduleSolution(occupations=sol.occupations, priorities=sol.priorities,
                            node_times=sol.node_times, block_times=sol.block_times,
                            objective=sol.objective,
                            total_delay=sol.objective - model.baseline,
                            status="optimal", stats=extra)
