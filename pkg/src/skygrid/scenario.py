"""Scenario configuration: parsing, validation, defaults, and random content.

A scenario is a YAML document with nested sections for the airspace, the
obstacle field, the UAV fleet, sudden-obstacle injections, and every
parameter block. Omitted fields fall back to the reference defaults
(1000x1000x250 m airspace in 5x5x5 cells, 75 random obstacles with heights
in [25, 240] m, one UAV from (0, 0, 0) to (750, 900, 80) at 5 m/s).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Optional

import numpy as np
import yaml

from .coarse import SspParams
from .geometry import CuboidObstacle, ObstacleKind, Point3
from .grid import AirspaceGrid, OutOfAirspace
from .pso import CostParams, SwarmParams
from .sampling import DEFAULT_SMOOTH_WINDOW, DEFAULT_WAYPOINT_COUNT, RrtParams, flatten_obstacles, point_free

DEFAULT_EXTENT = (1000.0, 1000.0, 250.0)
DEFAULT_COUNTS = (5, 5, 5)
DEFAULT_START = (0.0, 0.0, 0.0)
DEFAULT_GOAL = (750.0, 900.0, 80.0)
DEFAULT_SPEED = 5.0
DEFAULT_OBSTACLE_COUNT = 75
DEFAULT_HEIGHT_RANGE = (25.0, 240.0)
DEFAULT_FOOTPRINT_RANGE = (20.0, 60.0)

# Reference single-cell environment: 200x200x50 m box with three buildings.
CELL_EXTENT = (200.0, 200.0, 50.0)
CELL_OBSTACLES = (
    ((40.0, 50.0, 0.0), (50.0, 50.0, 100.0)),
    ((20.0, 120.0, 0.0), (30.0, 30.0, 100.0)),
    ((150.0, 125.0, 0.0), (30.0, 30.0, 100.0)),
)


class ParseError(Exception):
    pass


class ValidationError(Exception):
    pass


@dataclass(frozen=True)
class UavSpec:
    id: str
    start: Point3
    goal: Point3
    speed: float = DEFAULT_SPEED


@dataclass
class Scenario:
    extent: tuple[float, float, float] = DEFAULT_EXTENT
    counts: tuple[int, int, int] = DEFAULT_COUNTS
    obstacles: list[CuboidObstacle] = field(default_factory=list)
    uavs: list[UavSpec] = field(default_factory=list)
    injections: list[tuple[int, CuboidObstacle]] = field(default_factory=list)
    ssp: SspParams = field(default_factory=SspParams)
    rrt: RrtParams = field(default_factory=RrtParams)
    cost: CostParams = field(default_factory=CostParams)
    swarm: SwarmParams = field(default_factory=SwarmParams)
    constraint_limits: dict[str, float] = field(
        default_factory=lambda: {"l_max": 40.0, "L_max": 400.0, "ta_max": 60.0, "pa_max": 45.0}
    )
    waypoints_per_cell: int = DEFAULT_WAYPOINT_COUNT
    smooth_window: int = DEFAULT_SMOOTH_WINDOW
    seed: int = 0
    mode: str = "SSP"
    max_ticks: int = 5000
    stagger: int = 0
    loss_rate: float = 0.0
    dt: float = 1.0

    def to_dict(self) -> dict:
        """Canonical fully-materialized form (no random-generation blocks)."""

        def ob_dict(ob: CuboidObstacle) -> dict:
            return {
                "anchor": [ob.anchor.x, ob.anchor.y, ob.anchor.z],
                "lengths": [ob.len_x, ob.len_y, ob.len_z],
                "kind": ob.kind.value,
                "id": ob.id,
            }

        return {
            "airspace": {"extent": list(self.extent), "cells": list(self.counts)},
            "obstacles": [ob_dict(ob) for ob in self.obstacles],
            "uavs": [
                {
                    "id": u.id,
                    "start": [u.start.x, u.start.y, u.start.z],
                    "goal": [u.goal.x, u.goal.y, u.goal.z],
                    "speed": u.speed,
                }
                for u in self.uavs
            ],
            "injections": [
                {"tick": t, "obstacle": ob_dict(ob)} for t, ob in self.injections
            ],
            "ssp": {
                "k1": self.ssp.k1,
                "k2": self.ssp.k2,
                "window_length": self.ssp.window_length,
            },
            "rrt": {
                "step_size": self.rrt.step_size,
                "max_iterations": self.rrt.max_iterations,
                "goal_bias": self.rrt.goal_bias,
            },
            "cost": {
                "k3": self.cost.k3,
                "k4": self.cost.k4,
                "k5": self.cost.k5,
                "k6": self.cost.k6,
            },
            "swarm": {
                "inertia": self.swarm.inertia,
                "c1": self.swarm.c1,
                "c2": self.swarm.c2,
                "v_max": self.swarm.v_max,
                "max_iterations": self.swarm.max_iterations,
                "n_rrt": self.swarm.n_rrt,
                "n_birrt": self.swarm.n_birrt,
            },
            "constraints": dict(self.constraint_limits),
            "waypoints_per_cell": self.waypoints_per_cell,
            "smooth_window": self.smooth_window,
            "seed": self.seed,
            "mode": self.mode,
            "max_ticks": self.max_ticks,
            "stagger": self.stagger,
            "loss_rate": self.loss_rate,
            "dt": self.dt,
        }

    def to_yaml(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=True)


def _triple(value, name: str) -> tuple[float, float, float]:
    if not isinstance(value, (list, tuple)) or len(value) != 3:
        raise ValidationError(f"{name} must be a list of three numbers")
    try:
        return tuple(float(v) for v in value)
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"{name} must contain numbers: {exc}") from exc


def _parse_obstacle(cfg: dict, index: int, kind: ObstacleKind) -> CuboidObstacle:
    _reject_unknown(cfg, {"anchor", "lengths", "kind", "id"}, f"obstacles[{index}]")
    anchor = _triple(cfg.get("anchor"), f"obstacles[{index}].anchor")
    lengths = _triple(cfg.get("lengths"), f"obstacles[{index}].lengths")
    names = ("len_x", "len_y", "len_z")
    for n, l in zip(names, lengths):
        if l <= 0:
            raise ValidationError(f"obstacles[{index}].{n} must be positive, got {l}")
    if "kind" in cfg:
        try:
            kind = ObstacleKind(cfg["kind"])
        except ValueError as exc:
            raise ValidationError(f"obstacles[{index}].kind: {exc}") from exc
    try:
        return CuboidObstacle(
            anchor=Point3(*anchor),
            len_x=lengths[0],
            len_y=lengths[1],
            len_z=lengths[2],
            kind=kind,
            id=str(cfg.get("id", f"ob{index}")),
        )
    except ValueError as exc:
        raise ValidationError(f"obstacles[{index}]: {exc}") from exc


def _reject_unknown(cfg: dict, allowed: set[str], where: str) -> None:
    unknown = set(cfg) - allowed
    if unknown:
        raise ValidationError(f"unknown key(s) {sorted(unknown)} in {where}")


def _section(cfg: dict, key: str) -> dict:
    value = cfg.get(key, {})
    if value is None:
        return {}
    if not isinstance(value, dict):
        raise ValidationError(f"{key} must be a mapping")
    return value


def generate_obstacles(
    extent: tuple[float, float, float],
    count: int,
    height_range: tuple[float, float],
    footprint_range: tuple[float, float],
    keep_clear: list[Point3],
    rng: np.random.Generator,
) -> list[CuboidObstacle]:
    """Seeded uniform placement of grounded cuboids avoiding the given points."""
    out: list[CuboidObstacle] = []
    clear = [(p.x, p.y, p.z) for p in keep_clear]
    attempts = 0
    while len(out) < count:
        attempts += 1
        if attempts > 1000 * max(count, 1):
            raise ValidationError("could not place random obstacles clear of UAV endpoints")
        sx = float(rng.uniform(*footprint_range))
        sy = float(rng.uniform(*footprint_range))
        h = float(min(rng.uniform(*height_range), extent[2]))
        x = float(rng.uniform(0.0, extent[0] - sx))
        y = float(rng.uniform(0.0, extent[1] - sy))
        ob = CuboidObstacle(
            anchor=Point3(x, y, 0.0), len_x=sx, len_y=sy, len_z=h, id=f"rob{len(out)}"
        )
        boxes = flatten_obstacles([ob], margin=5.0)
        if all(point_free(p, boxes) for p in clear):
            out.append(ob)
    return out


def generate_uavs(
    grid: AirspaceGrid,
    count: int,
    min_cell_separation: int,
    speed: float,
    rng: np.random.Generator,
) -> list[UavSpec]:
    """Random collision-free start/goal pairs at least the given number of
    cells apart (L1 distance of cell coordinates)."""
    boxes = flatten_obstacles(grid.obstacles, margin=1.0)
    out: list[UavSpec] = []

    def free_point() -> Point3:
        for _ in range(10000):
            p = tuple(float(rng.uniform(0.0, grid.extent[i])) for i in range(3))
            if point_free(p, boxes):
                return Point3(*p)
        raise ValidationError("could not sample a collision-free UAV endpoint")

    for i in range(count):
        for _ in range(10000):
            start = free_point()
            goal = free_point()
            cs = grid.cell_coords(grid.locate(start))
            cg = grid.cell_coords(grid.locate(goal))
            if sum(abs(a - b) for a, b in zip(cs, cg)) >= min_cell_separation:
                out.append(UavSpec(id=f"uav{i}", start=start, goal=goal, speed=speed))
                break
        else:
            raise ValidationError("could not sample start/goal pair with required separation")
    return out


def load_scenario(
    source: str,
    seed_override: Optional[int] = None,
    mode_override: Optional[str] = None,
) -> Scenario:
    """Parse YAML text (or an empty string for all defaults) into a Scenario.

    Random-content blocks (random_obstacles, random_uavs) are materialized
    here from the scenario seed, so the returned Scenario is fully explicit.
    """
    try:
        cfg = yaml.safe_load(source) or {}
    except yaml.YAMLError as exc:
        raise ParseError(f"invalid YAML: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ParseError("scenario must be a YAML mapping")

    _reject_unknown(
        cfg,
        {
            "airspace", "obstacles", "random_obstacles", "uavs", "random_uavs",
            "injections", "ssp", "rrt", "cost", "swarm", "constraints",
            "waypoints_per_cell", "smooth_window", "seed", "mode", "max_ticks",
            "stagger", "loss_rate", "dt",
        },
        "scenario",
    )

    airspace = _section(cfg, "airspace")
    _reject_unknown(airspace, {"extent", "cells"}, "airspace")
    extent = _triple(airspace.get("extent", DEFAULT_EXTENT), "airspace.extent")
    cells_raw = airspace.get("cells", DEFAULT_COUNTS)
    if not isinstance(cells_raw, (list, tuple)) or len(cells_raw) != 3:
        raise ValidationError("airspace.cells must be a list of three integers")
    counts = tuple(int(c) for c in cells_raw)
    if any(c < 1 for c in counts):
        raise ValidationError("airspace.cells entries must be >= 1")
    if any(e <= 0 for e in extent):
        raise ValidationError("airspace.extent entries must be positive")

    seed = int(cfg.get("seed", 0)) if seed_override is None else int(seed_override)
    mode = str(cfg.get("mode", "SSP")) if mode_override is None else str(mode_override)

    def params(section: str, cls, mapping: dict[str, str]):
        raw = _section(cfg, section)
        _reject_unknown(raw, set(mapping), section)
        kwargs = {mapping[k]: raw[k] for k in raw}
        try:
            return cls(**kwargs)
        except (TypeError, ValueError) as exc:
            raise ValidationError(f"{section}: {exc}") from exc

    ssp = params("ssp", SspParams, {"k1": "k1", "k2": "k2", "window_length": "window_length"})
    rrt = params(
        "rrt",
        RrtParams,
        {"step_size": "step_size", "max_iterations": "max_iterations", "goal_bias": "goal_bias"},
    )
    cost = params("cost", CostParams, {"k3": "k3", "k4": "k4", "k5": "k5", "k6": "k6"})
    swarm = params(
        "swarm",
        SwarmParams,
        {
            "inertia": "inertia", "c1": "c1", "c2": "c2", "v_max": "v_max",
            "max_iterations": "max_iterations", "n_rrt": "n_rrt", "n_birrt": "n_birrt",
        },
    )
    constraints_raw = _section(cfg, "constraints")
    _reject_unknown(constraints_raw, {"l_max", "L_max", "ta_max", "pa_max"}, "constraints")
    limits = {"l_max": 40.0, "L_max": 400.0, "ta_max": 60.0, "pa_max": 45.0}
    for k, v in constraints_raw.items():
        v = float(v)
        if v <= 0:
            raise ValidationError(f"constraints.{k} must be positive, got {v}")
        limits[k] = v

    # Explicit obstacles; the random block fills in the default field when
    # neither is given.
    obstacles: list[CuboidObstacle] = []
    if "obstacles" in cfg and cfg["obstacles"] is not None:
        if not isinstance(cfg["obstacles"], list):
            raise ValidationError("obstacles must be a list")
        for i, ob_cfg in enumerate(cfg["obstacles"]):
            obstacles.append(_parse_obstacle(ob_cfg, i, ObstacleKind.STATIC))

    # Explicit UAVs.
    uavs: list[UavSpec] = []
    if "uavs" in cfg and cfg["uavs"] is not None:
        if not isinstance(cfg["uavs"], list):
            raise ValidationError("uavs must be a list")
        for i, u in enumerate(cfg["uavs"]):
            _reject_unknown(u, {"id", "start", "goal", "speed"}, f"uavs[{i}]")
            start = Point3(*_triple(u.get("start"), f"uavs[{i}].start"))
            goal = Point3(*_triple(u.get("goal"), f"uavs[{i}].goal"))
            speed = float(u.get("speed", DEFAULT_SPEED))
            if speed <= 0:
                raise ValidationError(f"uavs[{i}].speed must be positive")
            uavs.append(UavSpec(id=str(u.get("id", f"uav{i}")), start=start, goal=goal, speed=speed))

    want_random_obstacles = "random_obstacles" in cfg or (
        "obstacles" not in cfg and "random_obstacles" not in cfg
    )
    rob = _section(cfg, "random_obstacles")
    _reject_unknown(rob, {"count", "height_range", "footprint_range"}, "random_obstacles")

    want_random_uavs = "random_uavs" in cfg
    ruav = _section(cfg, "random_uavs")
    _reject_unknown(ruav, {"count", "min_cell_separation", "speed"}, "random_uavs")

    if not uavs and not want_random_uavs:
        uavs = [UavSpec(id="uav0", start=Point3(*DEFAULT_START), goal=Point3(*DEFAULT_GOAL))]

    if want_random_obstacles:
        count = int(rob.get("count", DEFAULT_OBSTACLE_COUNT))
        if count < 0:
            raise ValidationError("random_obstacles.count must be >= 0")
        hr = rob.get("height_range", DEFAULT_HEIGHT_RANGE)
        fr = rob.get("footprint_range", DEFAULT_FOOTPRINT_RANGE)
        keep_clear = [p for u in uavs for p in (u.start, u.goal)]
        rng = np.random.default_rng(np.random.SeedSequence((seed, 0x0B5)))
        obstacles = obstacles + generate_obstacles(
            extent, count, (float(hr[0]), float(hr[1])), (float(fr[0]), float(fr[1])),
            keep_clear, rng,
        )

    grid = AirspaceGrid(extent=extent, counts=counts, obstacles=obstacles)

    if want_random_uavs:
        count = int(ruav.get("count", 1))
        sep = int(ruav.get("min_cell_separation", 0))
        speed = float(ruav.get("speed", DEFAULT_SPEED))
        rng = np.random.default_rng(np.random.SeedSequence((seed, 0x0A7)))
        uavs = uavs + generate_uavs(grid, count, sep, speed, rng)

    # Injections.
    injections: list[tuple[int, CuboidObstacle]] = []
    if "injections" in cfg and cfg["injections"] is not None:
        if not isinstance(cfg["injections"], list):
            raise ValidationError("injections must be a list")
        for i, inj in enumerate(cfg["injections"]):
            _reject_unknown(inj, {"tick", "obstacle"}, f"injections[{i}]")
            tick = int(inj.get("tick", -1))
            if tick < 0:
                raise ValidationError(f"injections[{i}].tick must be >= 0")
            ob = _parse_obstacle(inj.get("obstacle", {}), i, ObstacleKind.SUDDEN)
            if ob.kind is not ObstacleKind.SUDDEN:
                raise ValidationError(f"injections[{i}].obstacle.kind must be sudden")
            injections.append((tick, ob))

    # Endpoint validation: inside the extent and collision-free.
    boxes = flatten_obstacles(obstacles)
    for u in uavs:
        for name, p in (("start", u.start), ("goal", u.goal)):
            try:
                grid.locate(p)
            except OutOfAirspace as exc:
                raise ValidationError(f"uav {u.id} {name}: {exc}") from exc
            if not point_free((p.x, p.y, p.z), boxes):
                raise ValidationError(f"uav {u.id} {name} lies inside an obstacle")

    scenario = Scenario(
        extent=extent,
        counts=counts,
        obstacles=obstacles,
        uavs=uavs,
        injections=injections,
        ssp=ssp,
        rrt=rrt,
        cost=cost,
        swarm=swarm,
        constraint_limits=limits,
        waypoints_per_cell=int(cfg.get("waypoints_per_cell", DEFAULT_WAYPOINT_COUNT)),
        smooth_window=int(cfg.get("smooth_window", DEFAULT_SMOOTH_WINDOW)),
        seed=seed,
        mode=mode,
        max_ticks=int(cfg.get("max_ticks", 5000)),
        stagger=int(cfg.get("stagger", 0)),
        loss_rate=float(cfg.get("loss_rate", 0.0)),
        dt=float(cfg.get("dt", 1.0)),
    )
    if scenario.waypoints_per_cell < 3:
        raise ValidationError("waypoints_per_cell must be >= 3")
    if not 0.0 <= scenario.loss_rate <= 1.0:
        raise ValidationError("loss_rate must be in [0, 1]")
    return scenario


def load_scenario_file(
    path: str, seed_override: Optional[int] = None, mode_override: Optional[str] = None
) -> Scenario:
    with open(path, "r", encoding="utf-8") as fh:
        return load_scenario(fh.read(), seed_override, mode_override)


def single_cell_scenario(
    seed: int = 0,
    start: tuple[float, float, float] = (10.0, 90.0, 10.0),
    goal: tuple[float, float, float] = (190.0, 130.0, 10.0),
) -> Scenario:
    """Reference single sub-airspace environment with its three buildings.

    The default start/goal pair has a building directly on the straight line.
    """
    obstacles = [
        CuboidObstacle(anchor=Point3(*a), len_x=l[0], len_y=l[1], len_z=l[2], id=f"ob{i+1}")
        for i, (a, l) in enumerate(CELL_OBSTACLES)
    ]
    return Scenario(
        extent=CELL_EXTENT,
        counts=(1, 1, 1),
        obstacles=obstacles,
        uavs=[UavSpec(id="uav0", start=Point3(*start), goal=Point3(*goal))],
        seed=seed,
    )
