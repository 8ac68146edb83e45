"""Domain model, time discretization and instance file I/O.

Everything downstream (criticality analysis, model generation, the solver and
the validator) works on the immutable types defined here.  Times are absolute
minutes throughout; the :class:`TimeGrid` maps them onto interval indices.
Input times must already sit on the grid -- misaligned values are rejected,
never rounded, because silent rounding would change headway feasibility.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Optional, Sequence


class InstanceError(ValueError):
    """Raised for schema or invariant violations; carries the offending entity id."""

    def __init__(self, message: str, entity: Optional[str] = None):
        self.entity = entity
        super().__init__(message if entity is None else f"{message} (entity: {entity})")


@dataclass(frozen=True)
class TimeGrid:
    """Uniform discretization of the planning horizon.

    `delta` is the interval length in minutes, `horizon` the total span and
    `start` the absolute minute at which the horizon begins.
    """

    delta: int
    horizon: int
    start: int = 0

    def __post_init__(self):
        if self.delta <= 0:
            raise InstanceError("grid delta must be positive", "grid")
        if self.horizon <= 0:
            raise InstanceError("grid horizon must be positive", "grid")
        if self.horizon % self.delta != 0:
            raise InstanceError("horizon must be an exact multiple of delta", "grid")

    @property
    def intervals(self) -> int:
        return self.horizon // self.delta

    @property
    def end(self) -> int:
        return self.start + self.horizon

    def is_aligned(self, minute: int) -> bool:
        return (minute - self.start) % self.delta == 0

    def contains(self, minute: int) -> bool:
        return self.start <= minute <= self.end


def to_interval(minute: int, grid: TimeGrid) -> int:
    """Map an absolute on-grid minute to its interval index (inverse of `to_minute`)."""
    if not grid.contains(minute):
        raise InstanceError(f"minute {minute} outside horizon [{grid.start}, {grid.end}]")
    if not grid.is_aligned(minute):
        raise InstanceError(f"minute {minute} is off-grid (delta={grid.delta})")
    return (minute - grid.start) // grid.delta


def to_minute(index: int, grid: TimeGrid) -> int:
    return grid.start + index * grid.delta


@dataclass(frozen=True)
class Node:
    id: str
    name: str = ""
    dwell_min: int = 0
    monthly_demand: int = 0
    is_dummy: bool = False
    capacity: Optional[int] = None  # used only in per-node capacity mode

    def __post_init__(self):
        if self.dwell_min < 0:
            raise InstanceError("dwell_min must be >= 0", self.id)
        if self.monthly_demand < 0:
            raise InstanceError("monthly_demand must be >= 0", self.id)


@dataclass(frozen=True)
class Block:
    """Undirected track segment between two stations.

    A train's route references blocks plus an implied traversal direction, so
    opposing trains name the same object.  `tracks` is 1 or 2; two tracks mean
    each direction normally has its own.
    """

    id: str
    a: str
    b: str
    tracks: int
    travel_time: int
    headway: int
    capacity: int

    def __post_init__(self):
        if self.a == self.b:
            raise InstanceError("block endpoints must be distinct", self.id)
        if self.tracks not in (1, 2):
            raise InstanceError("tracks must be 1 or 2", self.id)
        if self.travel_time <= 0:
            raise InstanceError("travel_time must be positive", self.id)
        if self.headway < 0:
            raise InstanceError("headway must be >= 0", self.id)
        if self.capacity < 1:
            raise InstanceError("capacity must be >= 1", self.id)

    @property
    def endpoints(self) -> frozenset:
        return frozenset((self.a, self.b))

    def other_end(self, node: str) -> str:
        if node == self.a:
            return self.b
        if node == self.b:
            return self.a
        raise InstanceError(f"node {node} not an endpoint of block", self.id)


class RailNetwork:
    """Set of nodes plus undirected blocks; at most one block per node pair."""

    def __init__(self, nodes: Iterable[Node], blocks: Iterable[Block]):
        self.nodes: dict[str, Node] = {}
        for n in nodes:
            if n.id in self.nodes:
                raise InstanceError("duplicate node id", n.id)
            self.nodes[n.id] = n
        self.blocks: dict[str, Block] = {}
        pairs = set()
        for b in blocks:
            if b.id in self.blocks:
                raise InstanceError("duplicate block id", b.id)
            for end in (b.a, b.b):
                if end not in self.nodes:
                    raise InstanceError(f"block endpoint {end} is not a node", b.id)
            if b.endpoints in pairs:
                raise InstanceError("more than one block for the same node pair", b.id)
            pairs.add(b.endpoints)
            self.blocks[b.id] = b
        self._by_pair = {b.endpoints: b for b in self.blocks.values()}
        self._adjacent: dict[str, list[Block]] = {nid: [] for nid in self.nodes}
        for b in self.blocks.values():
            self._adjacent[b.a].append(b)
            self._adjacent[b.b].append(b)
        if self.blocks and not self._connected():
            warnings.warn("network is not connected", stacklevel=2)

    def _connected(self) -> bool:
        touched = {nid for nid, adj in self._adjacent.items() if adj}
        if not touched:
            return True
        seen = set()
        stack = [next(iter(touched))]
        while stack:
            nid = stack.pop()
            if nid in seen:
                continue
            seen.add(nid)
            for b in self._adjacent[nid]:
                stack.append(b.other_end(nid))
        return touched <= seen

    def block_between(self, i: str, j: str) -> Optional[Block]:
        return self._by_pair.get(frozenset((i, j)))

    def incident(self, node: str) -> Sequence[Block]:
        return tuple(self._adjacent[node])

    def degree(self, node: str) -> int:
        return len(self._adjacent[node])


@dataclass(frozen=True)
class Stop:
    node: str
    arrive: int
    depart: int


class Occupation(NamedTuple):
    """One traversed block of a train's initial plan, with its direction."""

    block: str
    from_node: str
    to_node: str
    entry: int
    exit: int


@dataclass(frozen=True)
class TrainService:
    """One train: fixed block route plus its initial timetable.

    `stops` lists every route node in order with scheduled arrival/departure
    minutes; the origin's arrival equals the pinned initial presence time and
    the destination's depart equals its arrive.
    """

    id: str
    direction: str  # "positive" | "negative"; informational grouping (R+/R-)
    origin: str
    destination: str
    route: tuple[str, ...]
    stops: tuple[Stop, ...]
    departure: int

    def __post_init__(self):
        if self.direction not in ("positive", "negative"):
            raise InstanceError("direction must be 'positive' or 'negative'", self.id)
        if len(self.stops) != len(self.route) + 1:
            raise InstanceError("stops must cover every route node", self.id)

    @property
    def nodes(self) -> tuple[str, ...]:
        return tuple(s.node for s in self.stops)

    def occupations(self) -> tuple[Occupation, ...]:
        occ = []
        for i, blk in enumerate(self.route):
            occ.append(Occupation(blk, self.stops[i].node, self.stops[i + 1].node,
                                  self.stops[i].depart, self.stops[i + 1].arrive))
        return tuple(occ)

    def validate(self, network: RailNetwork, grid: TimeGrid) -> None:
        if self.origin not in network.nodes:
            raise InstanceError(f"origin {self.origin} unknown", self.id)
        if self.destination not in network.nodes:
            raise InstanceError(f"destination {self.destination} unknown", self.id)
        if self.stops[0].node != self.origin or self.stops[-1].node != self.destination:
            raise InstanceError("stops must run from origin to destination", self.id)
        if self.departure != self.stops[0].depart:
            raise InstanceError("departure must equal the origin stop's depart", self.id)
        seen = set()
        at = self.origin
        for i, blk_id in enumerate(self.route):
            blk = network.blocks.get(blk_id)
            if blk is None:
                raise InstanceError(f"route block {blk_id} unknown", self.id)
            if at not in blk.endpoints:
                raise InstanceError(f"route is not a path at block {blk_id}", self.id)
            nxt = blk.other_end(at)
            if nxt in seen:
                raise InstanceError("route revisits a node", self.id)
            seen.add(at)
            if self.stops[i + 1].node != nxt:
                raise InstanceError(f"stop {i + 1} does not match route", self.id)
            at = nxt
        if at != self.destination:
            raise InstanceError("route does not end at destination", self.id)
        for s in self.stops:
            for minute in (s.arrive, s.depart):
                if not grid.contains(minute):
                    raise InstanceError(f"time {minute} outside horizon at {s.node}", self.id)
                if not grid.is_aligned(minute):
                    raise InstanceError(f"off-grid time {minute} at {s.node}", self.id)
            if s.depart < s.arrive:
                raise InstanceError(f"depart before arrive at {s.node}", self.id)
        for occ in self.occupations():
            blk = network.blocks[occ.block]
            if occ.exit - occ.entry != blk.travel_time:
                raise InstanceError(
                    f"travel-time mismatch on block {occ.block}: "
                    f"{occ.exit - occ.entry} != {blk.travel_time}", self.id)
        for i in range(1, len(self.stops) - 1):
            s = self.stops[i]
            dwell = network.nodes[s.node].dwell_min
            if s.depart - s.arrive < dwell:
                raise InstanceError(
                    f"dwell {s.depart - s.arrive} below minimum {dwell} at {s.node}", self.id)


@dataclass(frozen=True)
class Closure:
    """Closure of `tracks_closed` tracks of one block over [start, start+duration).

    For a partial closure of a double block, `direction` names the traversal
    direction whose track is out (as an ordered node pair); trains running that
    way are the directly disrupted ones, while the block single-tracks for
    everyone during the window.
    """

    block: str
    start: int
    duration: int
    tracks_closed: int
    direction: Optional[tuple[str, str]] = None

    def __post_init__(self):
        if self.duration <= 0:
            raise InstanceError("closure duration must be positive", self.block)
        if self.tracks_closed not in (1, 2):
            raise InstanceError("tracks_closed must be 1 or 2", self.block)

    @property
    def end(self) -> int:
        return self.start + self.duration

    def window(self) -> tuple[int, int]:
        return (self.start, self.end)


@dataclass(frozen=True)
class DisruptionScenario:
    closures: tuple[Closure, ...] = ()

    @property
    def empty(self) -> bool:
        return not self.closures

    def start(self) -> Optional[int]:
        """Disruption start t_dis: the earliest closure start, None if undisrupted."""
        return min((c.start for c in self.closures), default=None)

    def validate(self, network: RailNetwork, grid: TimeGrid) -> None:
        per_block: dict[str, list[Closure]] = {}
        for c in self.closures:
            blk = network.blocks.get(c.block)
            if blk is None:
                raise InstanceError("closure references unknown block", c.block)
            if c.tracks_closed > blk.tracks:
                raise InstanceError("tracks_closed exceeds block tracks", c.block)
            if c.tracks_closed < blk.tracks and c.direction is None:
                raise InstanceError(
                    "partial closure of a double block needs a direction", c.block)
            if c.direction is not None and frozenset(c.direction) != blk.endpoints:
                raise InstanceError("closure direction does not match block", c.block)
            for minute in (c.start, c.end):
                if not grid.is_aligned(minute):
                    raise InstanceError(f"closure window off-grid at {minute}", c.block)
                if not grid.contains(minute):
                    raise InstanceError(f"closure window outside horizon at {minute}", c.block)
            per_block.setdefault(c.block, []).append(c)
        for blk_id, items in per_block.items():
            items = sorted(items, key=lambda c: c.start)
            for prev, cur in zip(items, items[1:]):
                if cur.start < prev.end:
                    raise InstanceError("overlapping closures on one block", blk_id)


@dataclass(frozen=True)
class ModelConfig:
    """Program-generation knobs: delay threshold, big-M, capacity mode, variant."""

    beta: int = 0
    big_m: Optional[int] = None
    capacity_mode: str = "block"  # "block" (Eq. 19 as printed) | "node" (footnote)
    variant: str = "basic"  # "basic" | "adjusted"

    def __post_init__(self):
        if self.beta < 0:
            raise InstanceError("beta must be >= 0", "config")
        if self.capacity_mode not in ("block", "node"):
            raise InstanceError("capacity_mode must be 'block' or 'node'", "config")
        if self.variant not in ("basic", "adjusted"):
            raise InstanceError("variant must be 'basic' or 'adjusted'", "config")

    def resolved_big_m(self, network: RailNetwork, grid: TimeGrid) -> int:
        tight = grid.horizon + max((b.headway for b in network.blocks.values()), default=0)
        if self.big_m is None:
            return tight
        if self.big_m < tight:
            raise InstanceError(f"big_m {self.big_m} below tight value {tight}", "config")
        return self.big_m


class Instance(NamedTuple):
    network: RailNetwork
    trains: list[TrainService]
    grid: TimeGrid


def baseline_objective(trains: Iterable[TrainService]) -> int:
    """Pre-disruption objective: sum over trains of destination minus origin arrival."""
    return sum(t.stops[-1].arrive - t.stops[0].arrive for t in trains)


# ---------------------------------------------------------------------------
# instance document I/O

def _require(mapping: dict, key: str, entity: str):
    if key not in mapping:
        raise InstanceError(f"missing key '{key}'", entity)
    return mapping[key]


def instance_from_dict(doc: dict) -> Instance:
    g = _require(doc, "grid", "document")
    grid = TimeGrid(delta=int(_require(g, "delta", "grid")),
                    horizon=int(_require(g, "horizon", "grid")),
                    start=int(g.get("start", 0)))
    nodes = []
    for nd in _require(doc, "nodes", "document"):
        nid = str(_require(nd, "id", "node"))
        nodes.append(Node(id=nid,
                          name=str(nd.get("name", nid)),
                          dwell_min=int(nd.get("dwell_min", 0)),
                          monthly_demand=int(nd.get("monthly_demand", 0)),
                          is_dummy=bool(nd.get("is_dummy", False)),
                          capacity=nd.get("capacity")))
    blocks = []
    for bd in _require(doc, "blocks", "document"):
        bid = str(_require(bd, "id", "block"))
        blocks.append(Block(id=bid,
                            a=str(_require(bd, "from", bid)),
                            b=str(_require(bd, "to", bid)),
                            tracks=int(_require(bd, "tracks", bid)),
                            travel_time=int(_require(bd, "travel_time", bid)),
                            headway=int(_require(bd, "headway", bid)),
                            capacity=int(_require(bd, "capacity", bid))))
    network = RailNetwork(nodes, blocks)
    for b in network.blocks.values():
        if b.travel_time % grid.delta != 0:
            raise InstanceError("travel_time not a multiple of grid delta", b.id)
        if b.headway % grid.delta != 0:
            raise InstanceError("headway not a multiple of grid delta", b.id)
    trains = []
    seen = set()
    for td in _require(doc, "trains", "document"):
        tid = str(_require(td, "id", "train"))
        if tid in seen:
            raise InstanceError("duplicate train id", tid)
        seen.add(tid)
        stops = tuple(Stop(node=str(_require(s, "node", tid)),
                           arrive=int(_require(s, "arrive", tid)),
                           depart=int(_require(s, "depart", tid)))
                      for s in _require(td, "stops", tid))
        train = TrainService(id=tid,
                             direction=str(_require(td, "direction", tid)),
                             origin=str(_require(td, "origin", tid)),
                             destination=str(_require(td, "destination", tid)),
                             route=tuple(str(x) for x in _require(td, "route", tid)),
                             stops=stops,
                             departure=int(_require(td, "departure", tid)))
        train.validate(network, grid)
        trains.append(train)
    return Instance(network, trains, grid)


def instance_to_dict(instance: Instance) -> dict:
    network, trains, grid = instance
    return {
        "grid": {"delta": grid.delta, "horizon": grid.horizon, "start": grid.start},
        "nodes": [{"id": n.id, "name": n.name, "dwell_min": n.dwell_min,
                   "monthly_demand": n.monthly_demand, "is_dummy": n.is_dummy,
                   **({"capacity": n.capacity} if n.capacity is not None else {})}
                  for n in network.nodes.values()],
        "blocks": [{"id": b.id, "from": b.a, "to": b.b, "tracks": b.tracks,
                    "travel_time": b.travel_time, "headway": b.headway,
                    "capacity": b.capacity}
                   for b in network.blocks.values()],
        "trains": [{"id": t.id, "direction": t.direction, "origin": t.origin,
                    "destination": t.destination, "route": list(t.route),
                    "stops": [{"node": s.node, "arrive": s.arrive, "depart": s.depart}
                              for s in t.stops],
                    "departure": t.departure}
                   for t in trains],
    }


def load_instance(source) -> Instance:
    """Load an instance document from a path, JSON string, or parsed dict."""
    if isinstance(source, dict):
        return instance_from_dict(source)
    text = source
    if hasattr(source, "read"):
        text = source.read()
    else:
        try:
            with open(source, "r", encoding="utf-8") as fh:
                text = fh.read()
        except (OSError, TypeError):
            pass  # treat as raw JSON text
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InstanceError(f"not valid JSON: {exc}") from exc
    return instance_from_dict(doc)


def save_instance(instance: Instance, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(instance_to_dict(instance), fh, indent=1)


def scenario_from_dict(doc: dict, network: RailNetwork, grid: TimeGrid) -> DisruptionScenario:
    closures = []
    for cd in doc.get("closures", []):
        direction = cd.get("direction")
        closures.append(Closure(block=str(_require(cd, "block", "closure")),
                                start=int(_require(cd, "start", "closure")),
                                duration=int(_require(cd, "duration", "closure")),
                                tracks_closed=int(_require(cd, "tracks_closed", "closure")),
                                direction=tuple(direction) if direction else None))
    scenario = DisruptionScenario(tuple(closures))
    scenario.validate(network, grid)
    return scenario


def scenario_to_dict(scenario: DisruptionScenario) -> dict:
    return {"closures": [{"block": c.block, "start": c.start, "duration": c.duration,
                          "tracks_closed": c.tracks_closed,
                          **({"direction": list(c.direction)} if c.direction else {})}
                         for c in scenario.closures]}


def load_scenario(source, network: RailNetwork, grid: TimeGrid) -> DisruptionScenario:
    if isinstance(source, dict):
        return scenario_from_dict(source, network, grid)
    text = source
    if hasattr(source, "read"):
        text = source.read()
    else:
        try:
            with open(source, "r", encoding="utf-8") as fh:
                text = fh.read()
        except (OSError, TypeError):
            pass
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InstanceError(f"not valid JSON: {exc}") from exc
    return scenario_from_dict(doc, network, grid)


def overlaps(a_start: int, a_end: int, b_start: int, b_end: int) -> bool:
    """Half-open interval intersection: [a_start, a_end) meets [b_start, b_end)."""
    return a_start < b_end and b_start < a_end
