"""Command-line surface.

Subcommands:
  plan-sub     plan one trajectory in the reference single sub-airspace
  plan         fly one UAV through the full airspace
  simulate     multi-UAV simulation
  compare      paired-mode runs over a seed range
  replan-demo  sudden-obstacle repair demonstration

Exit codes: 0 success, 1 planning failure, 2 input/usage error.
"""

from __future__ import annotations

import argparse
import sys

from .geometry import CuboidObstacle, ObstacleKind, Point3
from .output import emit_comparison, emit_results, _write_table
from .replan import RepairFailed, detect_conflicts, repair
from .sampling import PlanningFailed
from .scenario import (
    ParseError,
    Scenario,
    ValidationError,
    load_scenario,
    load_scenario_file,
    single_cell_scenario,
)
from .sim import Mode, ScenarioInvalid, SimMetrics, World

DEFAULT_MULTI_UAV_CONFIG = "random_uavs: {count: 50, min_cell_separation: 5}\n"


def _load(args, default_text: str = "") -> Scenario:
    if args.scenario:
        return load_scenario_file(args.scenario, args.seed, getattr(args, "mode", None))
    return load_scenario(default_text, args.seed, getattr(args, "mode", None))


def _run_and_emit(scenario: Scenario, args) -> int:
    world = World(scenario, Mode(scenario.mode))
    metrics = world.run()
    emit_results(metrics, args.out, args.format, bus_log=world.bus.log)
    if metrics.failed:
        print(f"planning failed for: {', '.join(metrics.failed)}", file=sys.stderr)
        return 1
    print(f"done: {len(metrics.arrived)}/{len(scenario.uavs)} arrived in {metrics.ticks} ticks")
    return 0


def cmd_plan_sub(args) -> int:
    scenario = _load(args) if args.scenario else single_cell_scenario(seed=args.seed or 0)
    if args.seed is not None:
        scenario.seed = args.seed
    if args.mode:
        scenario.mode = args.mode
    return _run_and_emit(scenario, args)


def cmd_plan(args) -> int:
    return _run_and_emit(_load(args), args)


def cmd_simulate(args) -> int:
    return _run_and_emit(_load(args, DEFAULT_MULTI_UAV_CONFIG), args)


def _parse_seed_range(text: str) -> list[int]:
    if ".." in text:
        lo, hi = text.split("..", 1)
        return list(range(int(lo), int(hi) + 1))
    return [int(s) for s in text.split(",") if s]


def cmd_compare(args) -> int:
    modes = [Mode(m) for m in args.mode.split(",")] if args.mode else [
        Mode.SSP, Mode.NO_SLIDING_WINDOW
    ]
    seeds = _parse_seed_range(args.seeds)
    rows = []
    any_failed = False
    for seed in seeds:
        for mode in modes:
            if args.scenario:
                scenario = load_scenario_file(args.scenario, seed, mode.value)
            else:
                scenario = load_scenario(DEFAULT_MULTI_UAV_CONFIG, seed, mode.value)
            metrics = World(scenario, mode).run()
            any_failed = any_failed or bool(metrics.failed)
            rows.append(
                {
                    "seed": seed,
                    "mode": mode.value,
                    "total_length_m": float(sum(metrics.per_uav_length.values())),
                    "max_occupancy": int(metrics.max_occupancy.max(initial=0)),
                    "arrived": len(metrics.arrived),
                    "failed": len(metrics.failed),
                }
            )
    emit_comparison(rows, args.out, args.format)
    print(f"compared {len(modes)} mode(s) over {len(seeds)} seed(s)")
    return 1 if any_failed else 0


def cmd_replan_demo(args) -> int:
    scenario = single_cell_scenario(seed=args.seed or 0)
    world = World(scenario, Mode.SSP)
    uav = world.uavs[0]
    world._enter_cell(uav, 1, Point3.from_array(uav.position))
    if uav.active_waypath is None:
        print("initial planning failed", file=sys.stderr)
        return 1
    committed = uav.active_waypath
    target = committed.waypoints[5]
    side = 10.0
    ob = CuboidObstacle(
        anchor=Point3(target[0] - side / 2, target[1] - side / 2, max(0.0, target[2] - side / 2)),
        len_x=side,
        len_y=side,
        len_z=side,
        kind=ObstacleKind.SUDDEN,
        id="demo-sudden",
    )
    conflicts = detect_conflicts(committed, ob)
    try:
        repaired = repair(
            committed, ob, world._cell_obstacles(1), world._constraints_for(1), uav.rng,
            scenario.rrt, scenario.smooth_window,
        )
    except RepairFailed as exc:
        print(f"repair failed: {exc}", file=sys.stderr)
        return 1
    metrics = SimMetrics(n_cells=1)
    from .sim import ExecutedPath

    metrics.convergence = world.metrics.convergence
    metrics.executed = [ExecutedPath("committed", 1, committed.waypoints)]
    emit_results(metrics, args.out, args.format)
    _write_table(
        f"{args.out}/waypoints_repaired",
        ["uav_id", "seq", "x", "y", "z", "cell_id"],
        [
            ["repaired", i, float(x), float(y), float(z), 1]
            for i, (x, y, z) in enumerate(repaired.waypoints)
        ],
        args.format,
    )
    print(
        f"conflicts at waypoints {sorted(conflicts)}; repaired path has "
        f"{repaired.count} waypoints"
    )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="skygrid",
        description="Grid-divided low-altitude airspace trajectory planning simulator.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, with_mode=True):
        p.add_argument("--scenario", help="scenario YAML file")
        p.add_argument("--seed", type=int, default=None, help="override the scenario seed")
        if with_mode:
            p.add_argument(
                "--mode",
                default=None,
                help="SSP | NoSlidingWindow | NoAttraction | RrtOnly | BirrtOnly",
            )
        p.add_argument("--out", default="out", help="output directory")
        p.add_argument("--format", default="csv", choices=("csv", "jsonl"))

    p = sub.add_parser("plan-sub", help="plan inside the reference sub-airspace")
    common(p)
    p.set_defaults(func=cmd_plan_sub)

    p = sub.add_parser("plan", help="one UAV through the full airspace")
    common(p)
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("simulate", help="multi-UAV simulation")
    common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("compare", help="paired-mode runs over a seed range")
    common(p)
    p.add_argument("--seeds", default="1..5", help="seed range 'a..b' or comma list")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("replan-demo", help="sudden-obstacle repair demonstration")
    common(p, with_mode=False)
    p.set_defaults(func=cmd_replan_demo)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code not in (0, None) else 0
    try:
        return args.func(args)
    except (ParseError, ValidationError, ScenarioInvalid, ValueError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return 2
    except (PlanningFailed, RepairFailed) as exc:
        print(f"planning failed: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
