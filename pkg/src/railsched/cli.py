"""Command-line front end.

Subcommands: analyze-nodes, aggregate, build, solve, validate, sweep, render.
Exit codes: 0 success/optimal, 1 input or I/O error, 2 infeasible, 3 timeout.
Verbosity via RAILSCHED_LOG (DEBUG/INFO/WARNING/ERROR) or -v.
CSV result rows use the fixed column set:
block,window_start,window_end,variant,r_star,objective,total_delay,status,wall_ms
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
import time

from . import data as bundled
from .core import (DisruptionScenario, InstanceError, ModelConfig,
                   baseline_objective, instance_to_dict, load_instance,
                   load_scenario)
from .criticality import Weights, aggregate, rank_nodes
from .model import build_adjusted, build_basic, identify_affected
from .mps import export_mps
from .render import render_diagram
from .solution import load_solution, schedule_from_entries
from .solver import SolverTimeout, solve
from .validate import check, delays

log = logging.getLogger("railsched")

CSV_COLUMNS = ["block", "window_start", "window_end", "variant", "r_star",
               "objective", "total_delay", "status", "wall_ms"]

EXIT_OK, EXIT_ERROR, EXIT_INFEASIBLE, EXIT_TIMEOUT = 0, 1, 2, 3


def _setup_logging(verbosity: int):
    level = os.environ.get("RAILSCHED_LOG", "").upper()
    if level:
        logging.basicConfig(level=getattr(logging, level, logging.WARNING))
    else:
        logging.basicConfig(level=max(logging.WARNING - 10 * verbosity, logging.DEBUG))


def _read_instance(path):
    if not os.path.exists(path):
        try:
            path = bundled.bundled_path(path)
        except FileNotFoundError:
            pass
    return load_instance(path)


def _read_scenario(path, network, grid):
    if path is None:
        return DisruptionScenario()
    if not os.path.exists(path):
        try:
            path = bundled.bundled_path(path)
        except FileNotFoundError:
            pass
    return load_scenario(path, network, grid)


def _write(text, out):
    if out in (None, "-"):
        sys.stdout.write(text)
        if not text.endswith("\n"):
            sys.stdout.write("\n")
    else:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)


def _config(args, variant=None):
    return ModelConfig(beta=args.beta, big_m=getattr(args, "big_m", None),
                       capacity_mode=getattr(args, "capacity_mode", "block"),
                       variant=variant or getattr(args, "variant", "basic"))


def _apply_headway(instance, headway):
    if headway is None:
        return instance
    from .core import Block, Instance, RailNetwork
    net = instance.network
    blocks = [Block(id=b.id, a=b.a, b=b.b, tracks=b.tracks,
                    travel_time=b.travel_time, headway=headway, capacity=b.capacity)
              for b in net.blocks.values()]
    return Instance(RailNetwork(list(net.nodes.values()), blocks),
                    instance.trains, instance.grid)


def _result_row(scenario, variant, r_star, objective, total_delay, status, wall_ms):
    blocks = "+".join(sorted({c.block for c in scenario.closures})) or "-"
    start = min((c.start for c in scenario.closures), default="")
    end = max((c.end for c in scenario.closures), default="")
    return {"block": blocks, "window_start": start, "window_end": end,
            "variant": variant, "r_star": ";".join(sorted(r_star, key=_num)) or "-",
            "objective": objective, "total_delay": total_delay, "status": status,
            "wall_ms": wall_ms}


def _num(x):
    return (0, int(x)) if str(x).isdigit() else (1, str(x))


def _emit_rows(rows, out):
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=CSV_COLUMNS)
    writer.writeheader()
    for row in rows:
        writer.writerow(row)
    _write(buf.getvalue(), out)


def cmd_analyze_nodes(args) -> int:
    instance = _read_instance(args.instance)
    records = rank_nodes(instance.network, Weights(args.alpha1, args.alpha2))
    selected = {r.node for r in records[:args.top]}
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(["name", "monthly_demand", "degree", "degree_norm",
                     "demand_norm", "criticality", "selected"])
    for r in records:
        writer.writerow([r.name or r.node, r.demand, r.degree,
                         f"{r.degree_norm:.9f}", f"{r.demand_norm:.9f}",
                         f"{r.index:.1f}", int(r.node in selected)])
    _write(buf.getvalue(), args.out)
    return EXIT_OK


def cmd_aggregate(args) -> int:
    instance = _read_instance(args.instance)
    keep = [k.strip() for k in args.keep.split(",") if k.strip()]
    result = aggregate(instance.network, instance.trains, keep,
                       dummy_dwell=args.dummy_dwell,
                       block_capacity=args.block_capacity)
    from .core import Instance
    doc = instance_to_dict(Instance(result.network, list(result.trains),
                                    instance.grid))
    doc["aggregation"] = {"kept": list(result.kept_nodes),
                          "dummies": list(result.dummy_nodes),
                          "dropped_trains": list(result.dropped_trains),
                          "provenance": {k: list(v) for k, v in
                                         result.block_provenance.items()}}
    _write(json.dumps(doc, indent=1), args.out)
    log.info("aggregated to %d nodes / %d blocks, dropped %d trains",
             len(result.network.nodes), len(result.network.blocks),
             len(result.dropped_trains))
    return EXIT_OK


def cmd_build(args) -> int:
    instance = _apply_headway(_read_instance(args.instance), args.headway)
    scenario = _read_scenario(args.scenario, instance.network, instance.grid)
    build = build_adjusted if args.variant == "adjusted" else build_basic
    model = build(instance.network, instance.trains, instance.grid, scenario,
                  _config(args))
    occ, pri = model.variables()
    log.info("model: %d occupation vars, %d priority vars, %d catalog rows",
             len(occ), len(pri), len(model.constraints()))
    if args.emit_mps:
        _write(export_mps(model), args.emit_mps)
    return EXIT_OK


def cmd_solve(args) -> int:
    instance = _apply_headway(_read_instance(args.instance), args.headway)
    scenario = _read_scenario(args.scenario, instance.network, instance.grid)
    build = build_adjusted if args.variant == "adjusted" else build_basic
    model = build(instance.network, instance.trains, instance.grid, scenario,
                  _config(args))
    t0 = time.monotonic()
    try:
        solution = solve(model, budget=args.budget, threads=args.threads)
    except SolverTimeout:
        row = _result_row(scenario, args.variant, set(), "", "", "timeout",
                          round((time.monotonic() - t0) * 1000, 1))
        _emit_rows([row], args.out)
        return EXIT_TIMEOUT
    wall_ms = round((time.monotonic() - t0) * 1000, 1)
    r_star = identify_affected(instance.trains, scenario, args.beta,
                               instance.network)
    if solution.status == "infeasible":
        row = _result_row(scenario, args.variant, r_star, "", "", "infeasible",
                          wall_ms)
        _emit_rows([row], args.out)
        log.warning("infeasible; conflicting constraints: %s. A larger --beta "
                    "may relax the delay cap.", ",".join(solution.certificate))
        return EXIT_INFEASIBLE
    report = delays(solution, instance)
    assert report.objective - baseline_objective(instance.trains) == report.total_delay
    row = _result_row(scenario, args.variant, r_star, report.objective,
                      report.total_delay, solution.status, wall_ms)
    _emit_rows([row], args.out)
    if args.solution:
        _write(solution.dumps(), args.solution)
    if solution.status == "timeout-with-incumbent":
        return EXIT_TIMEOUT
    return EXIT_OK


def cmd_validate(args) -> int:
    instance = _read_instance(args.instance)
    scenario = _read_scenario(args.scenario, instance.network, instance.grid)
    solution = load_solution(args.solution)
    report = check(solution, instance, scenario, _config(args))
    if args.json:
        _write(json.dumps(report.to_dict(), indent=1), args.out)
    else:
        text = report.table()
        if report.ok:
            text += "\n" + delays(solution, instance).table()
        _write(text, args.out)
    return EXIT_OK if report.ok else EXIT_INFEASIBLE


def _nested_windows(scenario, duration):
    closures = []
    for c in scenario.closures:
        center = c.start + c.duration // 2
        half = duration // 2
        from .core import Closure
        closures.append(Closure(block=c.block, start=center - half,
                                duration=duration, tracks_closed=c.tracks_closed,
                                direction=c.direction))
    return DisruptionScenario(tuple(closures))


def cmd_sweep(args) -> int:
    instance = _read_instance(args.instance)
    scenario = _read_scenario(args.scenario, instance.network, instance.grid)
    values = [int(v) for v in args.values.split(",")]
    rows = []
    objectives = []
    for v in values:
        inst = instance
        scen = scenario
        beta = args.beta
        if args.parameter == "headway":
            inst = _apply_headway(instance, v)
        elif args.parameter == "closure-duration":
            scen = _nested_windows(scenario, v)
        elif args.parameter == "beta":
            beta = v
        else:
            raise InstanceError(f"unknown sweep parameter {args.parameter}")
        config = ModelConfig(beta=beta, capacity_mode=args.capacity_mode,
                             variant=args.variant)
        build = build_adjusted if args.variant == "adjusted" else build_basic
        t0 = time.monotonic()
        try:
            model = build(inst.network, inst.trains, inst.grid, scen, config)
            solution = solve(model, budget=args.budget, threads=args.threads)
        except SolverTimeout:
            rows.append(_result_row(scen, args.variant, set(), "", "", "timeout",
                                    round((time.monotonic() - t0) * 1000, 1)))
            objectives.append(None)
            continue
        wall_ms = round((time.monotonic() - t0) * 1000, 1)
        r_star = identify_affected(inst.trains, scen, beta, inst.network)
        if solution.status == "infeasible":
            rows.append(_result_row(scen, args.variant, r_star, "", "",
                                    "infeasible", wall_ms))
            objectives.append(None)
            continue
        rep = delays(solution, inst)
        rows.append(_result_row(scen, args.variant, r_star, rep.objective,
                                rep.total_delay, solution.status, wall_ms))
        objectives.append(rep.objective)
    _emit_rows(rows, args.out)
    solved = [(v, o) for v, o in zip(values, objectives) if o is not None]
    for (v1, o1), (v2, o2) in zip(solved, solved[1:]):
        if args.parameter in ("headway", "closure-duration") and o2 < o1:
            log.error("monotonicity violated: objective fell from %s (%s=%s) "
                      "to %s (%s=%s) -- engine bug", o1, args.parameter, v1,
                      o2, args.parameter, v2)
            return EXIT_ERROR
    return EXIT_OK


def cmd_render(args) -> int:
    instance = _read_instance(args.instance)
    scenario = _read_scenario(args.scenario, instance.network, instance.grid)
    if args.solution:
        solution = load_solution(args.solution)
    else:
        entries = {t.id: [o.entry for o in t.occupations()]
                   for t in instance.trains}
        solution = schedule_from_entries(instance.trains, instance.network, entries)
    corridor = ([c.strip() for c in args.corridor.split(",") if c.strip()]
                if args.corridor else None)
    text = render_diagram(solution, instance, corridor=corridor, fmt=args.format,
                          scenario=scenario if scenario.closures else None)
    _write(text, args.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="railsched",
        description="Exact rescheduling of disrupted rail networks")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, scenario_required=False):
        p.add_argument("--instance", required=True,
                       help="instance JSON path or bundled name")
        p.add_argument("--scenario", required=scenario_required, default=None,
                       help="disruption JSON path or bundled name")
        p.add_argument("--variant", choices=["basic", "adjusted"], default="basic")
        p.add_argument("--beta", type=int, default=0, help="delay threshold, minutes")
        p.add_argument("--headway", type=int, default=None,
                       help="override every block headway, minutes")
        p.add_argument("--capacity-mode", choices=["block", "node"], default="block")
        p.add_argument("--budget", type=float, default=300.0,
                       help="solver wall-clock budget, seconds")
        p.add_argument("--threads", type=int, default=1)
        p.add_argument("--out", default=None, help="output path (default stdout)")

    p = sub.add_parser("analyze-nodes", help="rank nodes by criticality index")
    p.add_argument("--instance", required=True)
    p.add_argument("--alpha1", type=float, default=0.6)
    p.add_argument("--alpha2", type=float, default=0.4)
    p.add_argument("--top", type=int, default=9)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_analyze_nodes)

    p = sub.add_parser("aggregate", help="contract the network onto kept nodes")
    p.add_argument("--instance", required=True)
    p.add_argument("--keep", required=True, help="comma-separated node ids")
    p.add_argument("--dummy-dwell", type=int, default=10)
    p.add_argument("--block-capacity", type=int, default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_aggregate)

    p = sub.add_parser("build", help="generate the program; optionally write MPS")
    common(p)
    p.add_argument("--big-m", type=int, default=None)
    p.add_argument("--emit-mps", default=None, help="write MPS to this path")
    p.set_defaults(func=cmd_build)

    p = sub.add_parser("solve", help="solve a scenario and print a result row")
    common(p)
    p.add_argument("--solution", default=None, help="also write the schedule JSON")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("validate", help="re-check a schedule independently")
    common(p)
    p.add_argument("--solution", required=True)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("sweep", help="sensitivity sweep over one parameter")
    common(p, scenario_required=True)
    p.add_argument("--parameter", required=True,
                   choices=["headway", "closure-duration", "beta"])
    p.add_argument("--values", required=True, help="comma-separated values")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("render", help="space-time diagram (svg or text)")
    common(p)
    p.add_argument("--solution", default=None,
                   help="schedule JSON; omitted = initial timetable")
    p.add_argument("--corridor", default=None, help="comma-separated node ids")
    p.add_argument("--format", choices=["svg", "text"], default="svg")
    p.set_defaults(func=cmd_render)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    _setup_logging(args.verbose)
    try:
        return args.func(args)
    except (InstanceError, FileNotFoundError, ValueError) as exc:
        log.error("%s", exc)
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
