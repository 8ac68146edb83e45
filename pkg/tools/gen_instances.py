#!/usr/bin/env python3
"""Regenerate the bundled instance and scenario documents.

Run from the repository root after an editable install:
    python tools/gen_instances.py
Each instance is validated (schema, grid alignment, initial-timetable
feasibility through the independent validator) before being written.
"""

import json
import os
import sys

from railsched import (DisruptionScenario, ModelConfig, baseline_objective,
                       load_instance)
from railsched.solution import schedule_from_entries
from railsched.validate import check

OUT = os.path.join(os.path.dirname(__file__), "..", "src", "railsched", "data")


def train_doc(tid, direction, nodes, blocks, entries, network_blocks):
    stops = []
    pos = entries[0]
    for i, node in enumerate(nodes):
        if i == 0:
            stops.append({"node": node, "arrive": entries[0], "depart": entries[0]})
        elif i < len(blocks):
            arrive = pos
            stops.append({"node": node, "arrive": arrive, "depart": entries[i]})
        else:
            stops.append({"node": node, "arrive": pos, "depart": pos})
        if i < len(blocks):
            pos = entries[i] + network_blocks[blocks[i]]
    return {"id": tid, "direction": direction, "origin": nodes[0],
            "destination": nodes[-1], "route": list(blocks), "stops": stops,
            "departure": entries[0]}


def build_testnet():
    # Reconstructed 11-node/11-block urban test network with a 2-hour horizon.
    # Fig-equivalent caption says 10 nodes / 10 blocks, but the timetable uses
    # node 11, and no 10-block tree admits the printed departure/arrival times
    # under same-direction headway 5 (trains 8/10/16 collide on every layout);
    # the eleventh block 1-6 resolves that.  Travel times are fitted to the 25
    # printed trips; every departure/arrival matches the published timetable.
    blocks = {
        "1-10": ("1", "10", 5, 1), "5-10": ("5", "10", 5, 1),
        "3-10": ("3", "10", 20, 1), "1-6": ("1", "6", 15, 1),
        "6-8": ("6", "8", 5, 1), "7-9": ("7", "9", 10, 1),
        "4-7": ("4", "7", 5, 1), "67": ("6", "7", 5, 2),
        "6-10": ("6", "10", 10, 2), "7-11": ("7", "11", 20, 2),
        "2-4": ("2", "4", 15, 2),
    }
    times = {bid: spec[2] for bid, spec in blocks.items()}
    trains = [
        ("1", ["1", "10", "5"], ["1-10", "5-10"], [0, 5]),
        ("2", ["7", "9"], ["7-9"], [0]),
        ("3", ["7", "6", "10", "5"], ["67", "6-10", "5-10"], [0, 5, 15]),
        ("4", ["10", "6", "7"], ["6-10", "67"], [10, 20]),
        ("5", ["4", "2"], ["2-4"], [10]),
        ("6", ["6", "7", "4"], ["67", "4-7"], [10, 15]),
        ("7", ["1", "6", "8"], ["1-6", "6-8"], [10, 25]),
        ("8", ["9", "7", "6", "10"], ["7-9", "67", "6-10"], [10, 20, 25]),
        ("9", ["11", "7", "4", "2"], ["7-11", "4-7", "2-4"], [15, 35, 40]),
        ("10", ["4", "7", "6", "10"], ["4-7", "67", "6-10"], [20, 25, 30]),
        ("11", ["10", "3"], ["3-10"], [20]),
        ("12", ["5", "10", "1"], ["5-10", "1-10"], [25, 30]),
        ("13", ["2", "4", "7", "6", "10", "5"],
         ["2-4", "4-7", "67", "6-10", "5-10"], [25, 40, 45, 50, 60]),
        ("14", ["10", "6", "7", "11"], ["6-10", "67", "7-11"], [20, 30, 35]),
        ("15", ["2", "4", "7"], ["2-4", "4-7"], [30, 45]),
        ("16", ["6", "1"], ["1-6"], [30]),
        ("17", ["1", "10", "6", "7", "4", "2"],
         ["1-10", "6-10", "67", "4-7", "2-4"], [35, 40, 50, 55, 60]),
        ("18", ["11", "7"], ["7-11"], [35]),
        ("19", ["3", "10"], ["3-10"], [60]),
        ("20", ["1", "10", "5"], ["1-10", "5-10"], [50, 55]),
        ("21", ["11", "7"], ["7-11"], [55]),
        ("22", ["10", "6", "7"], ["6-10", "67"], [60, 70]),
        ("23", ["5", "10", "6", "7", "9"],
         ["5-10", "6-10", "67", "7-9"], [65, 70, 80, 85]),
        ("24", ["4", "7", "6", "10"], ["4-7", "67", "6-10"], [70, 75, 80]),
        ("25", ["2", "4", "7", "6", "10", "5"],
         ["2-4", "4-7", "67", "6-10", "5-10"], [75, 90, 95, 100, 110]),
    ]
    doc = {
        "comment": [
            "Reconstructed crowded urban test network: 25 trains, 2-hour horizon.",
            "The published figure text says 10 nodes and 10 blocks, yet the",
            "timetable references node 11; this reconstruction uses 11 nodes and",
            "11 blocks (cycle 1-10-6-1) because no 10-block tree admits the",
            "printed dep/arr times under same-direction headway 5.",
            "Block 67 is the famous double-track block between nodes 6 and 7.",
            "Trip lengths and all departures/arrivals match the published table;",
            "baseline objective = 540 minutes.",
        ],
        "grid": {"delta": 5, "horizon": 120, "start": 0},
        "nodes": [{"id": str(i), "name": f"Station {i}", "dwell_min": 0,
                   "monthly_demand": 0, "is_dummy": False} for i in range(1, 12)],
        "blocks": [{"id": bid, "from": a, "to": b, "tracks": tr, "travel_time": tt,
                    "headway": 5, "capacity": 3}
                   for bid, (a, b, tt, tr) in blocks.items()],
        "trains": [],
    }
    for tid, nodes, route, entries in trains:
        direction = "positive" if int(nodes[-1]) > int(nodes[0]) else "negative"
        doc["trains"].append(train_doc(tid, direction, nodes, route, entries, times))
    return doc


def build_iran_aggregated():
    # Aggregated national network: 9 important nodes plus dummy junction 7,
    # nine blocks named by endpoint digits (45 Tehran-Mashhad, 46 Tehran-Qom...).
    # Block times are fitted so the 16 timetabled runs sum to 13375 minutes;
    # 13 of 16 printed arrivals are met exactly (trains 7, 10, 13 deviate; the
    # printed Kerman-Mashhad row is internally inconsistent with rows 3/4/7).
    names = {"1": "Tabriz", "2": "Maraghe", "3": "Karaj", "4": "Tehran",
             "5": "Mashhad", "6": "Qom", "7": "Kashan (dummy)", "8": "Isfahan",
             "9": "Kerman", "10": "Ahvaz"}
    blocks = {
        "12": ("1", "2", 360, 1), "23": ("2", "3", 360, 1),
        "34": ("3", "4", 60, 1), "45": ("4", "5", 660, 2),
        "46": ("4", "6", 120, 2), "67": ("6", "7", 60, 1),
        "78": ("7", "8", 240, 1), "79": ("7", "9", 460, 1),
        "6-10": ("6", "10", 835, 1),
    }
    times = {bid: spec[2] for bid, spec in blocks.items()}
    trains = [
        ("1", ["5", "4", "6"], ["45", "46"], [60, 720]),
        ("2", ["5", "4", "3"], ["45", "34"], [380, 1040]),
        ("3", ["5", "4"], ["45"], [460]),
        ("4", ["4", "5"], ["45"], [480]),
        ("5", ["8", "7", "6", "4", "5"], ["78", "67", "46", "45"],
         [495, 745, 805, 925]),
        ("6", ["5", "4", "6"], ["45", "46"], [650, 1310]),
        ("7", ["9", "7", "6", "4"], ["79", "67", "46"], [805, 1275, 1335]),
        ("8", ["1", "2", "3", "4", "5"], ["12", "23", "34", "45"],
         [840, 1200, 1560, 1620]),
        ("9", ["5", "4", "6", "7", "8"], ["45", "46", "67", "78"],
         [865, 1525, 1645, 1715]),
        ("10", ["10", "6", "4"], ["6-10", "46"], [910, 1745]),
        ("11", ["3", "4", "5"], ["34", "45"], [970, 1030]),
        ("12", ["1", "2", "3", "4"], ["12", "23", "34"], [1015, 1375, 1735]),
        ("13", ["9", "7", "6", "4", "5"], ["79", "67", "46", "45"],
         [1045, 1515, 1575, 1695]),
        ("14", ["2", "3", "4"], ["23", "34"], [1065, 1425]),
        ("3p", ["5", "4"], ["45"], [1900]),
        ("4p", ["4", "5"], ["45"], [1920]),
    ]
    doc = {
        "comment": [
            "Aggregated intercity network: nine important nodes plus the dummy",
            "junction 7 ('Kashan'), blocks named by endpoint digits.  delta=5,",
            "45-hour horizon starting 00:00 of the first day.",
            "16 runs: the 14 timetabled day-1 trains plus the next-day copies 3p",
            "and 4p of the daily trains 3 and 4; the daily trains 8 and 12 get",
            "no second run because it could not finish inside the horizon.",
            "Block times fitted to the published trip lengths; baseline is",
            "exactly 13375 minutes.  Deviations from printed arrivals: train 7",
            "(Kerman-Tehran) 1455 vs 1715, train 10 (Ahvaz-Tehran) 1865 vs 1870,",
            "train 13 (Kerman-Mashhad) 2355 vs 2005 - the printed row is",
            "inconsistent with the Kerman-Tehran and Tehran-Mashhad rows it",
            "must traverse.",
            "Trains crossing the dummy junction dwell there 10 minutes.",
        ],
        "grid": {"delta": 5, "horizon": 2700, "start": 0},
        "nodes": [{"id": nid, "name": nm,
                   "dwell_min": 10 if nid == "7" else 0,
                   "monthly_demand": 0, "is_dummy": nid == "7"}
                  for nid, nm in names.items()],
        "blocks": [{"id": bid, "from": a, "to": b, "tracks": tr, "travel_time": tt,
                    "headway": 5, "capacity": 5}
                   for bid, (a, b, tt, tr) in blocks.items()],
        "trains": [],
    }
    for tid, nodes, route, entries in trains:
        direction = "positive" if nodes[-1] in ("5", "4") else "negative"
        doc["trains"].append(train_doc(tid, direction, nodes, route, entries, times))
    return doc


IRAN_STATION_DEMANDS = {
    "tehran": (2556200, "Tehran"), "khaf": (44800, "Khaf"),
    "tabas": (44800, "Tabas"), "mashhad": (3459600, "Mashhad"),
    "isfahan": (230400, "Isfahan"), "shiraz": (153600, "Shiraz"),
    "tabriz": (499200, "Tabriz"), "urmia": (96000, "Urmia"),
    "ahvaz": (384000, "Ahvaz"), "zanjan": (136200, "Zanjan"),
    "ghazvin": (57600, "Ghazvin"), "karaj": (172800, "Karaj"),
    "kashan": (96000, "Kashan"), "qom": (211200, "Qom"),
    "arak-qom": (38400, "Arak-Qom"), "malayer": (96000, "Malayer"),
    "kermanshah": (96000, "Kermanshah"), "yazd": (144900, "Yazd"),
    "bandar-abbas": (38400, "Bandar Abbas"), "kerman": (230400, "Kerman"),
    "sari": (96000, "Sari"), "hamedan": (134400, "Hamedan"),
    "rasht": (164100, "Rasht"), "khoramshahr": (76800, "Khoramshahr"),
    "maraghe": (96000, "Maraghe"), "mianeh": (42000, "Mianeh"),
}

IRAN_AUX = ["semnan", "garmsar", "gorgan", "jolfa", "badroud", "dorud",
            "bandar-imam", "torbat", "kohin"]

IRAN_EDGES = [
    ("tehran", "karaj", 60, 1), ("tehran", "qom", 120, 2),
    ("tehran", "semnan", 220, 2), ("semnan", "garmsar", 220, 2),
    ("semnan", "tabas", 480, 1), ("garmsar", "mashhad", 220, 2),
    ("garmsar", "sari", 240, 1), ("sari", "gorgan", 180, 1),
    ("karaj", "kohin", 30, 1), ("kohin", "ghazvin", 30, 1),
    ("kohin", "rasht", 180, 1), ("ghazvin", "zanjan", 120, 1),
    ("zanjan", "mianeh", 90, 1), ("mianeh", "maraghe", 90, 1),
    ("mianeh", "hamedan", 240, 1), ("maraghe", "tabriz", 360, 1),
    ("maraghe", "urmia", 300, 1), ("tabriz", "jolfa", 160, 1),
    ("qom", "kashan", 40, 1), ("kashan", "badroud", 20, 1),
    ("badroud", "isfahan", 240, 1), ("badroud", "yazd", 220, 1),
    ("isfahan", "shiraz", 420, 1), ("yazd", "kerman", 240, 1),
    ("kerman", "bandar-abbas", 420, 1), ("qom", "arak-qom", 120, 1),
    ("arak-qom", "dorud", 120, 1), ("dorud", "malayer", 120, 1),
    ("malayer", "kermanshah", 180, 1), ("dorud", "ahvaz", 595, 1),
    ("ahvaz", "khoramshahr", 120, 1), ("ahvaz", "bandar-imam", 100, 1),
    ("tabas", "khaf", 420, 1), ("khaf", "torbat", 180, 1),
]


def build_iran_stations():
    # Large-scale national network carrying the October-2022 station demands
    # and degrees; auxiliary junction/branch stations carry the minimum demand.
    # Chain sums reproduce the aggregated block times exactly, so aggregating
    # onto the top-9 stations yields the bundled aggregated instance.
    p_min = 38400
    edge_time = {}
    for a, b, tt, tr in IRAN_EDGES:
        edge_time[frozenset((a, b))] = tt
    paths = {
        "45": ["mashhad", "garmsar", "semnan", "tehran"],
        "46": ["tehran", "qom"],
        "34": ["karaj", "tehran"],
        "12": ["tabriz", "maraghe"],
        "23": ["maraghe", "mianeh", "zanjan", "ghazvin", "kohin", "karaj"],
        "67": ["qom", "kashan", "badroud"],
        "78": ["badroud", "isfahan"],
        "79": ["badroud", "yazd", "kerman"],
        "6-10": ["qom", "arak-qom", "dorud", "ahvaz"],
    }

    def leg(seq, start, dwell_at=()):
        """(nodes, blocks, entry offsets) for walking `seq` from minute start."""
        nodes = list(seq)
        blocks = []
        entries = []
        pos = start
        for a, b in zip(seq, seq[1:]):
            entries.append(pos)
            blocks.append(edge_name(a, b))
            pos += edge_time[frozenset((a, b))]
            if b in dwell_at:
                pos += 10
        return nodes, blocks, entries, pos

    def edge_name(a, b):
        return "--".join(sorted((a, b)))

    # train routes as kept-node itineraries expanded over the chains above;
    # rev=True walks the chain list back to front
    def expand(*path_dirs):
        seq = []
        for pid, rev in path_dirs:
            part = paths[pid][::-1] if rev else paths[pid]
            if seq:
                assert seq[-1] == part[0], (seq[-1], part[0])
                seq += part[1:]
            else:
                seq = list(part)
        return seq

    runs = [
        ("1", expand(("45", False), ("46", False)), 60, ()),
        ("2", expand(("45", False), ("34", True)), 380, ()),
        ("3", expand(("45", False)), 460, ()),
        ("4", expand(("45", True)), 480, ()),
        ("5", expand(("78", True), ("67", True), ("46", True), ("45", True)),
         495, ("badroud",)),
        ("6", expand(("45", False), ("46", False)), 650, ()),
        ("7", expand(("79", True), ("67", True), ("46", True)), 805, ("badroud",)),
        ("8", expand(("12", False), ("23", False), ("34", False), ("45", True)),
         840, ()),
        ("9", expand(("45", False), ("46", False), ("67", False), ("78", False)),
         865, ("badroud",)),
        ("10", expand(("6-10", True), ("46", True)), 910, ()),
        ("11", expand(("34", False), ("45", True)), 970, ()),
        ("12", expand(("12", False), ("23", False), ("34", False)), 1015, ()),
        ("13", expand(("79", True), ("67", True), ("46", True), ("45", True)),
         1045, ("badroud",)),
        ("14", expand(("23", False), ("34", False)), 1065, ()),
        ("3p", expand(("45", False)), 1900, ()),
        ("4p", expand(("45", True)), 1920, ()),
    ]
    doc = {
        "comment": [
            "Large-scale national network: 26 demand-bearing stations (October",
            "2022 monthly figures) plus 9 auxiliary junction/branch stations at",
            "the minimum demand.  Degrees of the demand-bearing stations match",
            "the published criticality table; chain travel times sum to the",
            "aggregated block times so that aggregation onto the top-9 stations",
            "reproduces the bundled aggregated instance.",
        ],
        "grid": {"delta": 5, "horizon": 2700, "start": 0},
        "nodes": [], "blocks": [], "trains": [],
    }
    for nid, (demand, name) in IRAN_STATION_DEMANDS.items():
        doc["nodes"].append({"id": nid, "name": name, "dwell_min": 0,
                             "monthly_demand": demand, "is_dummy": False})
    for nid in IRAN_AUX:
        doc["nodes"].append({"id": nid, "name": nid.title(), "dwell_min": 0,
                             "monthly_demand": p_min, "is_dummy": False})
    for a, b, tt, tr in IRAN_EDGES:
        doc["blocks"].append({"id": edge_name(a, b), "from": a, "to": b,
                              "tracks": tr, "travel_time": tt, "headway": 5,
                              "capacity": 5})
    for tid, seq, dep, dwell_at in runs:
        nodes, blocks, entries, _ = leg(seq, dep, dwell_at)
        direction = "positive" if nodes[-1] in ("mashhad", "tehran") else "negative"
        times = {edge_name(a, b): edge_time[frozenset((a, b))]
                 for a, b in zip(seq, seq[1:])}
        doc["trains"].append(train_doc(tid, direction, nodes, blocks, entries, times))
    return doc


def build_sweep_instance():
    # Congested synthetic corridor for sensitivity sweeps: 9 stations, 8 double
    # blocks of 10 minutes, 20 trains alternating directions every 25 minutes.
    n = 9
    nodes = [f"n{i}" for i in range(1, n + 1)]
    blocks = [(f"b{i}", f"n{i}", f"n{i + 1}") for i in range(1, n)]
    times = {bid: 10 for bid, _, _ in blocks}
    doc = {
        "comment": [
            "Synthetic congested corridor used by the sensitivity sweeps:",
            "20 trains (10 per direction), departures every 25 minutes per",
            "direction, all blocks double with ample yard capacity.",
        ],
        "grid": {"delta": 5, "horizon": 360, "start": 0},
        "nodes": [{"id": nid, "name": nid, "dwell_min": 0, "monthly_demand": 0,
                   "is_dummy": False} for nid in nodes],
        "blocks": [{"id": bid, "from": a, "to": b, "tracks": 2, "travel_time": 10,
                    "headway": 5, "capacity": 12} for bid, a, b in blocks],
        "trains": [],
    }
    for k in range(10):
        dep = 25 * k
        route = [f"b{i}" for i in range(1, n)]
        entries = [dep + 10 * i for i in range(n - 1)]
        doc["trains"].append(train_doc(f"e{k + 1}", "positive", nodes, route,
                                       entries, times))
        dep = 10 + 25 * k
        route_w = [f"b{i}" for i in range(n - 1, 0, -1)]
        entries_w = [dep + 10 * i for i in range(n - 1)]
        doc["trains"].append(train_doc(f"w{k + 1}", "negative", nodes[::-1],
                                       route_w, entries_w, times))
    return doc


SCENARIOS = {
    "testnet-s1": {"closures": [{"block": "67", "start": 15, "duration": 20,
                                 "tracks_closed": 2}]},
    "testnet-s2": {"closures": [{"block": "67", "start": 15, "duration": 20,
                                 "tracks_closed": 1, "direction": ["6", "7"]}]},
    "iran-46": {"closures": [{"block": "46", "start": 720, "duration": 120,
                              "tracks_closed": 2}]},
    "iran-46-partial": {"closures": [{"block": "46", "start": 720, "duration": 120,
                                      "tracks_closed": 1, "direction": ["4", "6"]}]},
    "iran-45": {"closures": [{"block": "45", "start": 720, "duration": 120,
                              "tracks_closed": 2}]},
    "iran-45-partial": {"closures": [{"block": "45", "start": 720, "duration": 120,
                                      "tracks_closed": 1, "direction": ["5", "4"]}]},
    "iran-34": {"closures": [{"block": "34", "start": 1450, "duration": 120,
                              "tracks_closed": 1}]},
    "iran-12": {"closures": [{"block": "12", "start": 910, "duration": 120,
                              "tracks_closed": 1}]},
    "iran-23": {"closures": [{"block": "23", "start": 1300, "duration": 120,
                              "tracks_closed": 1}]},
    "sweep-closure": {"closures": [{"block": "b4", "start": 60, "duration": 120,
                                    "tracks_closed": 2}]},
}


def verify(doc, expect_baseline=None):
    instance = load_instance(doc)
    entries = {t.id: [o.entry for o in t.occupations()] for t in instance.trains}
    schedule = schedule_from_entries(instance.trains, instance.network, entries)
    report = check(schedule, instance, DisruptionScenario(),
                   ModelConfig(beta=0, variant="basic"))
    assert report.ok, report.table()
    base = baseline_objective(instance.trains)
    if expect_baseline is not None:
        assert base == expect_baseline, (base, expect_baseline)
    return base


def main():
    os.makedirs(OUT, exist_ok=True)
    docs = {
        "testnet": (build_testnet(), 540),
        "iran-aggregated": (build_iran_aggregated(), 13375),
        "iran-stations": (build_iran_stations(), 13375),
        "sweep-congested": (build_sweep_instance(), None),
    }
    for name, (doc, base) in docs.items():
        got = verify(doc, base)
        path = os.path.join(OUT, f"{name}.json")
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(doc, fh, indent=1)
        print(f"wrote {name}.json (baseline {got})")
    for name, doc in SCENARIOS.items():
        path = os.path.join(OUT, f"{name}.json")
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(doc, fh, indent=1)
        print(f"wrote {name}.json")


if __name__ == "__main__":
    sys.exit(main())
