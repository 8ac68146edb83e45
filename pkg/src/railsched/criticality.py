"""Node importance ranking and network aggregation.

The importance index combines a node's normalized degree and normalized
passenger demand through a weighted geometric mean scaled to ~100.  Aggregation
contracts chains of unimportant nodes into longer blocks, reinstating as dummy
stations only those removed junctions where surviving trains' routes split.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

from .core import (Block, InstanceError, Node, Occupation, RailNetwork, Stop,
                   TrainService)


class DegenerateRangeError(ValueError):
    pass


@dataclass(frozen=True)
class Weights:
    """Exponents on the two normalized measures; must lie in (0,1) and sum to 1."""

    alpha1: float
    alpha2: float

    def __post_init__(self):
        if not (0.0 < self.alpha1 < 1.0 and 0.0 < self.alpha2 < 1.0):
            raise InstanceError("weights must lie strictly between 0 and 1", "weights")
        if abs(self.alpha1 + self.alpha2 - 1.0) > 1e-12:
            raise InstanceError("weights must sum to one", "weights")


@dataclass(frozen=True)
class CriticalityRecord:
    node: str
    name: str
    demand: int
    degree: int
    degree_norm: float
    demand_norm: float
    index: float


def normalized_degree(d: int, d_min: int, d_max: int) -> float:
    """Degree scaled into (0, 1]; the d == d_min case stays strictly positive."""
    if d_max == d_min:
        raise DegenerateRangeError("degenerate degree range")
    if not (d_min <= d <= d_max):
        raise ValueError(f"degree {d} outside [{d_min}, {d_max}]")
    if d == d_min:
        return 0.5 / (d_max - d_min)
    return (d - d_min) / (d_max - d_min)


def normalized_demand(p: float, p_min: float, p_max: float) -> float:
    """Demand scaled against the network extremes; the 0.8 factor keeps it positive."""
    if p_max == p_min:
        raise DegenerateRangeError("degenerate demand range")
    if not (p_min <= p <= p_max):
        raise ValueError(f"demand {p} outside [{p_min}, {p_max}]")
    return (p - 0.8 * p_min) / (p_max - p_min)


def criticality_index(degree_norm: float, demand_norm: float, w: Weights) -> float:
    if degree_norm <= 0 or demand_norm <= 0:
        raise ValueError("normalized measures must be positive")
    return (degree_norm ** w.alpha1) * (demand_norm ** w.alpha2) * 100.0


def rank_nodes(network: RailNetwork, w: Weights) -> list[CriticalityRecord]:
    """One record per non-dummy node, sorted by index descending.

    Ties break on higher demand, then node id ascending, so output order is
    deterministic.
    """
    real = [n for n in network.nodes.values() if not n.is_dummy]
    if not real:
        return []
    degrees = {n.id: network.degree(n.id) for n in real}
    d_min, d_max = min(degrees.values()), max(degrees.values())
    demands = {n.id: n.monthly_demand for n in real}
    p_min, p_max = min(demands.values()), max(demands.values())
    records = []
    for n in real:
        dn = normalized_degree(degrees[n.id], d_min, d_max)
        pn = normalized_demand(demands[n.id], p_min, p_max)
        records.append(CriticalityRecord(node=n.id, name=n.name, demand=n.monthly_demand,
                                         degree=degrees[n.id], degree_norm=dn,
                                         demand_norm=pn,
                                         index=criticality_index(dn, pn, w)))
    records.sort(key=lambda r: (-r.index, -r.demand, r.node))
    return records


@dataclass(frozen=True)
class AggregationResult:
    network: RailNetwork
    kept_nodes: tuple[str, ...]
    dummy_nodes: tuple[str, ...]
    trains: tuple[TrainService, ...]
    dropped_trains: tuple[str, ...]
    block_provenance: dict  # aggregated block id -> ordered original segment ids


def _route_nodes(train: TrainService) -> list[str]:
    return [s.node for s in train.stops]


def _find_dummies(network: RailNetwork, trains: Sequence[TrainService],
                  keep: set) -> set:
    """Removed nodes where two surviving trains' routes diverge or merge.

    A removed node is a junction for the aggregated plan when the surviving
    routes passing through it use three or more distinct incident segments in
    total (the Kashan case: one shared approach, two distinct continuations).
    """
    used: dict[str, set] = {}
    for t in trains:
        if t.origin not in keep or t.destination not in keep:
            continue
        nodes = _route_nodes(t)
        for i, nid in enumerate(nodes):
            if nid in keep or nid not in network.nodes:
                continue
            segs = used.setdefault(nid, set())
            if i > 0:
                segs.add(t.route[i - 1])
            if i < len(t.route):
                segs.add(t.route[i])
    return {nid for nid, segs in used.items() if len(segs) >= 3}


def _walk_chains(network: RailNetwork, kept: set) -> list[list[Block]]:
    """Maximal block chains joining two kept nodes through removed nodes.

    Dead branches (walks that end at a removed leaf or loop back) are dropped;
    removed junction nodes simply fan the walk out along every other incident
    block.
    """
    chains = []
    seen_keys = set()
    for start in sorted(kept):
        if start not in network.nodes:
            raise InstanceError("keep set references unknown node", start)
        for first in sorted(network.incident(start), key=lambda b: b.id):
            stack = [(first.other_end(start), [first])]
            while stack:
                at, path = stack.pop()
                if at == start:
                    continue  # cycle back to the origin, not a chain
                if at in kept:
                    key = frozenset((start, at, tuple(b.id for b in path)))
                    mirror = frozenset((at, start, tuple(b.id for b in reversed(path))))
                    if key in seen_keys or mirror in seen_keys:
                        continue
                    seen_keys.add(key)
                    chains.append(path)
                    continue
                taken = {b.id for b in path}
                for nxt in sorted(network.incident(at), key=lambda b: b.id):
                    if nxt.id in taken:
                        continue
                    stack.append((nxt.other_end(at), path + [nxt]))
    return chains


def _chain_block(chain: list[Block], start: str, block_capacity: Optional[int]) -> Block:
    travel = sum(b.travel_time for b in chain)
    tracks = 2 if all(b.tracks == 2 for b in chain) else 1
    headway = max(b.headway for b in chain)
    cap = block_capacity if block_capacity is not None else max(b.capacity for b in chain)
    at = start
    ends = [at]
    for b in chain:
        at = b.other_end(at)
        ends.append(at)
    if len(chain) == 1:
        bid = chain[0].id
    else:
        bid = f"{ends[0]}-{ends[-1]}"
    return Block(id=bid, a=ends[0], b=ends[-1], tracks=tracks,
                 travel_time=travel, headway=headway, capacity=cap)


def aggregate(network: RailNetwork, trains: Sequence[TrainService], keep: Iterable[str],
              dummy_dwell: int = 10, block_capacity: Optional[int] = None) -> AggregationResult:
    """Shrink the network to the kept nodes, contracting removed chains into blocks.

    Trains whose origin or destination is removed are dropped.  Surviving
    trains keep their scheduled times at every retained node; a dwell at a
    removed chain node is absorbed by holding at the chain's entry node, which
    conserves each train's end-to-end initial travel time.
    """
    keep = set(keep)
    for nid in keep:
        if nid not in network.nodes:
            raise InstanceError("keep set references unknown node", nid)
    survivors = [t for t in trains if t.origin in keep and t.destination in keep]
    dropped = tuple(t.id for t in trains if t.id not in {s.id for s in survivors})
    dummies = _find_dummies(network, survivors, keep)
    kept = keep | dummies

    chains = _walk_chains(network, kept)
    new_blocks: dict[frozenset, Block] = {}
    provenance: dict[str, tuple[str, ...]] = {}
    for chain in chains:
        # recover the chain's kept endpoints in walk order
        endpoints = set()
        counts: dict[str, int] = {}
        for b in chain:
            for e in (b.a, b.b):
                counts[e] = counts.get(e, 0) + 1
        outer = [e for e, c in counts.items() if c == 1]
        if len(chain) == 1:
            outer = [chain[0].a, chain[0].b]
        start = min(e for e in outer if e in kept)
        blk = _chain_block(chain, start, block_capacity)
        pair = blk.endpoints
        if pair in new_blocks:
            # parallel chains between one kept pair: keep the faster one
            if blk.travel_time >= new_blocks[pair].travel_time:
                continue
        new_blocks[pair] = blk
        at = start
        order = []
        for b in chain:
            order.append(b.id)
            at = b.other_end(at)
        provenance[blk.id] = tuple(order)

    nodes = []
    for nid in sorted(kept):
        n = network.nodes[nid]
        if nid in dummies:
            nodes.append(Node(id=n.id, name=n.name, dwell_min=dummy_dwell,
                              monthly_demand=n.monthly_demand, is_dummy=True,
                              capacity=n.capacity))
        else:
            nodes.append(n)
    agg_net = RailNetwork(nodes, list(new_blocks.values()))

    projected = []
    for t in survivors:
        nodes_seq = _route_nodes(t)
        kept_idx = [i for i, nid in enumerate(nodes_seq) if nid in kept]
        new_route = []
        new_stops = [t.stops[kept_idx[0]]]
        ok = True
        for a_i, b_i in zip(kept_idx, kept_idx[1:]):
            a, b = nodes_seq[a_i], nodes_seq[b_i]
            blk = agg_net.block_between(a, b)
            if blk is None:
                raise InstanceError(
                    f"train {t.id} route leaves the kept subgraph between {a} and {b}",
                    t.id)
            new_route.append(blk.id)
            arrive_b = t.stops[b_i].arrive
            # mid-chain dwell is absorbed: hold at the entry node instead
            depart_a = arrive_b - blk.travel_time
            prev = new_stops[-1]
            if depart_a < prev.arrive:
                ok = False
                break
            new_stops[-1] = Stop(node=prev.node, arrive=prev.arrive, depart=depart_a)
            new_stops.append(Stop(node=b, arrive=arrive_b, depart=t.stops[b_i].depart))
        if not ok:
            raise InstanceError(f"cannot project train {t.id} onto aggregated blocks", t.id)
        last = new_stops[-1]
        new_stops[-1] = Stop(node=last.node, arrive=last.arrive, depart=last.arrive)
        projected.append(TrainService(id=t.id, direction=t.direction, origin=t.origin,
                                      destination=t.destination, route=tuple(new_route),
                                      stops=tuple(new_stops),
                                      departure=new_stops[0].depart))
    return AggregationResult(network=agg_net, kept_nodes=tuple(sorted(keep)),
                             dummy_nodes=tuple(sorted(dummies)),
                             trains=tuple(projected), dropped_trains=dropped,
                             block_provenance=provenance)
