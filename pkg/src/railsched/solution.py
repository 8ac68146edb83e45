"""Schedule solution container shared by the solver, validator and CLI."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import NamedTuple, Optional


class SolOccupation(NamedTuple):
    """One occupied arc: a block traversal, or a waiting self-loop at a node
    (arc == node id, from_node == to_node).  Times are absolute minutes,
    half-open [entry, exit)."""

    arc: str
    from_node: str
    to_node: str
    entry: int
    exit: int

    @property
    def is_wait(self) -> bool:
        return self.from_node == self.to_node


@dataclass(frozen=True)
class ScheduleSolution:
    occupations: dict  # train id -> tuple[SolOccupation]
    priorities: tuple  # (first train, second train, block) triples
    node_times: dict  # train id -> {node id: (arrive, depart)}
    block_times: dict  # train id -> {block id: (entry, exit)}
    objective: int
    total_delay: int
    status: str  # optimal | infeasible | timeout-with-incumbent
    gap: Optional[int] = None
    certificate: tuple = ()  # tags of a conflicting constraint subset (infeasible)
    stats: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "status": self.status,
            "objective": self.objective,
            "total_delay": self.total_delay,
            "gap": self.gap,
            "certificate": list(self.certificate),
            "occupations": {tid: [list(o) for o in occ]
                            for tid, occ in self.occupations.items()},
            "priorities": [list(p) for p in self.priorities],
            "node_times": {tid: {n: list(v) for n, v in times.items()}
                           for tid, times in self.node_times.items()},
            "block_times": {tid: {b: list(v) for b, v in times.items()}
                            for tid, times in self.block_times.items()},
            "stats": self.stats,
        }

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=1)


def solution_from_dict(doc: dict) -> ScheduleSolution:
    return ScheduleSolution(
        occupations={tid: tuple(SolOccupation(*o) for o in occ)
                     for tid, occ in doc.get("occupations", {}).items()},
        priorities=tuple(tuple(p) for p in doc.get("priorities", [])),
        node_times={tid: {n: tuple(v) for n, v in times.items()}
                    for tid, times in doc.get("node_times", {}).items()},
        block_times={tid: {b: tuple(v) for b, v in times.items()}
                     for tid, times in doc.get("block_times", {}).items()},
        objective=int(doc.get("objective", 0)),
        total_delay=int(doc.get("total_delay", 0)),
        status=str(doc.get("status", "optimal")),
        gap=doc.get("gap"),
        certificate=tuple(doc.get("certificate", [])),
        stats=doc.get("stats", {}),
    )


def load_solution(source) -> ScheduleSolution:
    if isinstance(source, dict):
        return solution_from_dict(source)
    text = source
    try:
        with open(source, "r", encoding="utf-8") as fh:
            text = fh.read()
    except (OSError, TypeError):
        pass
    return solution_from_dict(json.loads(text))


def schedule_from_entries(trains, network, entries: dict) -> ScheduleSolution:
    """Assemble a solution from chosen block-entry minutes per train.

    `entries[train id]` lists one entry minute per route block.  Waiting arcs
    (including an origin hold after the pinned arrival) are derived; node and
    block times follow.  Objective and delay are filled in against the initial
    timetable.
    """
    occupations = {}
    node_times = {}
    block_times = {}
    priorities = []
    by_block: dict = {}
    objective = 0
    delay = 0
    for t in trains:
        ent = entries[t.id]
        occ = []
        ntimes = {}
        btimes = {}
        arrive_origin = t.stops[0].arrive
        pos = arrive_origin
        for i, blk_id in enumerate(t.route):
            e = ent[i]
            blk = network.blocks[blk_id]
            if e > pos:
                node = t.stops[i].node
                occ.append(SolOccupation(node, node, node, pos, e))
            frm, to = t.stops[i].node, t.stops[i + 1].node
            occ.append(SolOccupation(blk_id, frm, to, e, e + blk.travel_time))
            ntimes[frm] = (pos if i else arrive_origin, e)
            btimes[blk_id] = (e, e + blk.travel_time)
            by_block.setdefault(blk_id, []).append((t.id, e))
            pos = e + blk.travel_time
        ntimes[t.destination] = (pos, pos)
        if not t.route:
            ntimes[t.origin] = (arrive_origin, arrive_origin)
        occupations[t.id] = tuple(occ)
        node_times[t.id] = ntimes
        block_times[t.id] = btimes
        objective += pos - arrive_origin
        delay += pos - t.stops[-1].arrive
    for blk_id, users in by_block.items():
        users.sort(key=lambda item: (item[1], item[0]))
        for i in range(len(users)):
            for j in range(i + 1, len(users)):
                priorities.append((users[i][0], users[j][0], blk_id))
    return ScheduleSolution(occupations=occupations, priorities=tuple(priorities),
                            node_times=node_times, block_times=block_times,
                            objective=objective, total_delay=delay, status="optimal")
