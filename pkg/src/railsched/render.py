"""Space-time trajectory rendering: SVG or plain text.

x = time along the grid, y = stations stacked in corridor order, one polyline
per train.  Closure windows are drawn as orange hatched bands over the affected
segment; traversals that must be using the opposite track of a half-closed
double block are dashed.
"""

from __future__ import annotations

from .core import InstanceError, overlaps

_COLORS = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#8c564b", "#e377c2",
           "#7f7f7f", "#bcbd22", "#17becf", "#ff7f0e"]


def _corridor_positions(corridor):
    return {nid: i for i, nid in enumerate(corridor)}


def _train_points(tid, occupations, pos):
    """(minute, y) vertices for one train; None when a node is off-corridor."""
    pts = []
    for o in sorted(occupations, key=lambda o: o.entry):
        if o.is_wait:
            continue
        for node, minute in ((o.from_node, o.entry), (o.to_node, o.exit)):
            if node not in pos:
                return None, node
            pts.append((minute, pos[node]))
    return pts, None


def _opposite_track(o, blocks, scenario):
    blk = blocks.get(o.arc)
    if blk is None or blk.tracks != 2:
        return False
    for c in scenario.closures:
        if (c.block == o.arc and c.tracks_closed == 1 and c.direction is not None
                and tuple(c.direction) == (o.from_node, o.to_node)
                and overlaps(o.entry, o.exit, c.start, c.end)):
            return True
    return False


def render_diagram(schedule, instance, corridor=None, fmt: str = "svg",
                   scenario=None) -> str:
    """Render a feasible schedule (or an initial timetable via
    `schedule_from_entries`) over the given station order."""
    network, trains, grid = instance
    if corridor is None:
        corridor = sorted(network.nodes, key=lambda nid: (len(nid), nid))
    corridor = list(corridor)
    for nid in corridor:
        if nid not in network.nodes:
            raise InstanceError("corridor references unknown node", nid)
    pos = _corridor_positions(corridor)
    series = []
    for tid in sorted(schedule.occupations, key=lambda x: (len(x), x)):
        occs = schedule.occupations[tid]
        pts, missing = _train_points(tid, occs, pos)
        if pts is None:
            raise InstanceError(
                f"train {tid} visits node {missing} outside the corridor", tid)
        dashed_segments = []
        ordered = [o for o in sorted(occs, key=lambda o: o.entry) if not o.is_wait]
        for o in ordered:
            if scenario is not None and _opposite_track(o, network.blocks, scenario):
                dashed_segments.append((o.entry, o.exit,
                                        pos[o.from_node], pos[o.to_node]))
        series.append((tid, pts, dashed_segments))
    if fmt == "svg":
        return _svg(series, corridor, grid, network, scenario)
    if fmt == "text":
        return _text(series, corridor, grid)
    raise ValueError(f"unknown format {fmt!r}")


def _svg(series, corridor, grid, network, scenario):
    width, height = 960, 60 + 40 * max(1, len(corridor) - 1) + 40
    left, top = 90, 30
    span = max(grid.horizon, 1)
    x_of = lambda minute: left + (minute - grid.start) * (width - left - 20) / span
    y_of = lambda row: top + row * 40
    parts = ['<?xml version="1.0" encoding="UTF-8"?>',
             f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
             f'height="{height}" viewBox="0 0 {width} {height}">',
             '<defs><pattern id="hatch" width="6" height="6" '
             'patternTransform="rotate(45)" patternUnits="userSpaceOnUse">'
             '<rect width="6" height="6" fill="#ff9933" fill-opacity="0.25"/>'
             '<line x1="0" y1="0" x2="0" y2="6" stroke="#ff7700" '
             'stroke-width="2"/></pattern></defs>',
             f'<rect width="{width}" height="{height}" fill="white"/>']
    pos = _corridor_positions(corridor)
    if scenario is not None:
        for c in scenario.closures:
            blk = network.blocks.get(c.block)
            if blk is None or blk.a not in pos or blk.b not in pos:
                continue
            ya, yb = sorted((y_of(pos[blk.a]), y_of(pos[blk.b])))
            parts.append(f'<rect x="{x_of(c.start):.1f}" y="{ya:.1f}" '
                         f'width="{x_of(c.end) - x_of(c.start):.1f}" '
                         f'height="{yb - ya:.1f}" fill="url(#hatch)" '
                         f'stroke="#ff7700"/>')
    for row, nid in enumerate(corridor):
        y = y_of(row)
        parts.append(f'<line x1="{left}" y1="{y}" x2="{width - 20}" y2="{y}" '
                     'stroke="#dddddd"/>')
        label = network.nodes[nid].name or nid
        parts.append(f'<text x="{left - 8}" y="{y + 4}" text-anchor="end" '
                     f'font-size="11" font-family="sans-serif">{_esc(label)}</text>')
    tick = max(grid.delta, grid.horizon // 12 // grid.delta * grid.delta or grid.delta)
    minute = grid.start
    while minute <= grid.end:
        x = x_of(minute)
        parts.append(f'<line x1="{x:.1f}" y1="{top - 10}" x2="{x:.1f}" '
                     f'y2="{height - 30}" stroke="#f0f0f0"/>')
        parts.append(f'<text x="{x:.1f}" y="{height - 14}" text-anchor="middle" '
                     f'font-size="10" font-family="sans-serif">{minute}</text>')
        minute += tick
    for k, (tid, pts, dashed) in enumerate(series):
        color = _COLORS[k % len(_COLORS)]
        if pts:
            coords = " ".join(f"{x_of(m):.1f},{y_of(r):.1f}" for m, r in pts)
            parts.append(f'<polyline points="{coords}" fill="none" '
                         f'stroke="{color}" stroke-width="1.6"/>')
            parts.append(f'<text x="{x_of(pts[0][0]) + 2:.1f}" '
                         f'y="{y_of(pts[0][1]) - 4:.1f}" font-size="9" '
                         f'fill="{color}" font-family="sans-serif">{_esc(tid)}</text>')
        for entry, exit_, r0, r1 in dashed:
            parts.append(f'<line x1="{x_of(entry):.1f}" y1="{y_of(r0):.1f}" '
                         f'x2="{x_of(exit_):.1f}" y2="{y_of(r1):.1f}" '
                         f'stroke="#cc0000" stroke-width="2.4" '
                         f'stroke-dasharray="6,4"/>')
    parts.append("</svg>")
    return "\n".join(parts)


def _esc(text):
    return (str(text).replace("&", "&amp;").replace("<", "&lt;")
            .replace(">", "&gt;"))


def _text(series, corridor, grid, width: int = 118):
    """Terminal rendering that fits a 120-column screen."""
    usable = width - 14
    cols = min(usable, grid.intervals)
    scale = grid.horizon / cols
    rows = {nid: i for i, nid in enumerate(corridor)}
    canvas = [[" "] * cols for _ in corridor]
    for k, (tid, pts, dashed) in enumerate(series):
        mark = tid[-1] if tid else "*"
        for (m0, r0), (m1, r1) in zip(pts, pts[1:]):
            steps = max(abs(r1 - r0), max(1, int((m1 - m0) / scale)))
            for s in range(steps + 1):
                frac = s / steps if steps else 0
                m = m0 + (m1 - m0) * frac
                r = round(r0 + (r1 - r0) * frac)
                c = min(cols - 1, int((m - grid.start) / scale))
                if canvas[r][c] == " ":
                    canvas[r][c] = mark
    lines = [f"time {grid.start}..{grid.end} min, one column ~ {scale:.1f} min"]
    for nid in corridor:
        label = nid[:12].rjust(12)
        lines.append(f"{label} |" + "".join(canvas[rows[nid]]))
    return "\n".join(lines)
