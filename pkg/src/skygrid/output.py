"""Result serialization: waypoint tables, occupancy, convergence, and logs.

Two formats are supported: CSV and JSON-lines. Columns are stable and files
are written deterministically (no timestamps, ordered rows) so repeated runs
with the same seed are byte-identical.
"""

from __future__ import annotations

import csv
import json
import os
from typing import Iterable

from .adsb import OccupancyReport, PositionReport, SuddenObstacleAlert
from .sim import SimMetrics


def _fmt(v) -> str:
    if isinstance(v, float):
        return f"{v:.6f}"
    return str(v)


def _write_table(path: str, header: list[str], rows: Iterable[list], fmt: str) -> None:
    if fmt == "csv":
        with open(path + ".csv", "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            for row in rows:
                writer.writerow([_fmt(v) for v in row])
    elif fmt == "jsonl":
        with open(path + ".jsonl", "w", encoding="utf-8") as fh:
            for row in rows:
                fh.write(json.dumps(dict(zip(header, row)), sort_keys=True) + "\n")
    else:
        raise ValueError(f"unknown format {fmt!r} (expected 'csv' or 'jsonl')")


def waypoint_rows(metrics: SimMetrics) -> list[list]:
    """Per-UAV waypoint table; the shared face point between consecutive cells
    appears once, and re-planned cells replace their earlier entry."""
    by_uav: dict[str, list] = {}
    for ex in metrics.executed:
        paths = by_uav.setdefault(ex.uav_id, [])
        if paths and paths[-1].cell == ex.cell:
            paths[-1] = ex  # re-plan/repair of the same cell supersedes
        else:
            paths.append(ex)
    rows = []
    for uav_id in sorted(by_uav):
        seq = 0
        prev_last = None
        for ex in by_uav[uav_id]:
            for i, (x, y, z) in enumerate(ex.waypoints):
                if i == 0 and prev_last is not None and tuple(prev_last) == (x, y, z):
                    continue
                rows.append([uav_id, seq, float(x), float(y), float(z), ex.cell])
                seq += 1
            prev_last = ex.waypoints[-1]
    return rows


def adsb_rows(bus_log) -> list[list]:
    rows = []
    for msg in bus_log:
        p = msg.payload
        if isinstance(p, PositionReport):
            detail = f"uav={p.uav_id};x={p.position.x:.6f};y={p.position.y:.6f};z={p.position.z:.6f}"
            kind = "position"
        elif isinstance(p, OccupancyReport):
            detail = "counts=" + "|".join(str(c) for c in p.counts)
            kind = "occupancy"
        elif isinstance(p, SuddenObstacleAlert):
            ob = p.obstacle
            detail = (
                f"cell={p.sub_airspace};anchor={ob.anchor.x:.3f},{ob.anchor.y:.3f},"
                f"{ob.anchor.z:.3f};lengths={ob.len_x:.3f},{ob.len_y:.3f},{ob.len_z:.3f}"
            )
            kind = "sudden_obstacle"
        else:
            detail = ""
            kind = type(p).__name__
        rows.append([msg.tick, msg.sender, kind, detail])
    return rows


def emit_results(metrics: SimMetrics, out_dir: str, fmt: str = "csv", bus_log=None) -> list[str]:
    """Write all result tables into out_dir; returns the written base names."""
    os.makedirs(out_dir, exist_ok=True)
    written = []

    _write_table(
        os.path.join(out_dir, "waypoints"),
        ["uav_id", "seq", "x", "y", "z", "cell_id"],
        waypoint_rows(metrics),
        fmt,
    )
    written.append("waypoints")

    _write_table(
        os.path.join(out_dir, "occupancy"),
        ["cell_id", "max_uavs"],
        [[i + 1, int(c)] for i, c in enumerate(metrics.max_occupancy)],
        fmt,
    )
    written.append("occupancy")

    conv_rows = []
    for run_id, history in metrics.convergence:
        for it, cost in enumerate(history):
            conv_rows.append([run_id, it, float(cost)])
    _write_table(
        os.path.join(out_dir, "convergence"), ["run_id", "iteration", "cost"], conv_rows, fmt
    )
    written.append("convergence")

    length_rows = [
        [uav_id, float(length), uav_id in metrics.arrived]
        for uav_id, length in sorted(metrics.per_uav_length.items())
    ]
    _write_table(
        os.path.join(out_dir, "lengths"), ["uav_id", "length_m", "arrived"], length_rows, fmt
    )
    written.append("lengths")

    if bus_log is not None:
        _write_table(
            os.path.join(out_dir, "adsb_log"),
            ["tick", "sender", "payload_kind", "detail"],
            adsb_rows(bus_log),
            fmt,
        )
        written.append("adsb_log")

    _write_table(
        os.path.join(out_dir, "events"),
        ["tick", "kind", "who", "detail"],
        [
            [
                e["tick"],
                e["kind"],
                e["who"],
                ";".join(f"{k}={v}" for k, v in sorted(e.items()) if k not in ("tick", "kind", "who")),
            ]
            for e in metrics.events
        ],
        fmt,
    )
    written.append("events")
    return written


def emit_comparison(rows: list[dict], out_dir: str, fmt: str = "csv") -> None:
    """Per-(seed, mode) summary table for paired-mode experiments."""
    os.makedirs(out_dir, exist_ok=True)
    header = ["seed", "mode", "total_length_m", "max_occupancy", "arrived", "failed"]
    _write_table(
        os.path.join(out_dir, "comparison"),
        header,
        [[r[k] for k in header] for r in rows],
        fmt,
    )
