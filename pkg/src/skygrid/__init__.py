"""Collision-free UAV trajectory planning in a grid-divided low-altitude airspace.

Coarse planning routes among equal sub-airspaces by occupancy-aware shortest
path with sliding-window re-planning and attraction-based exit points; fine
planning inside each sub-airspace refines RRT/Bi-RRT seed trajectories with
particle-swarm optimization; a simulated ADS-B bus carries positions and
sudden-obstacle alerts driving in-flight repair.
"""

from .adsb import AdsbBus, AdsbMessage, OccupancyReport, PositionReport, SuddenObstacleAlert, aggregate_occupancy, broadcast_sudden_obstacle
from .coarse import CoarsePlan, SspParams, attraction_region, node_cost, plan_coarse, select_exit_point, sliding_window_replan
from .geometry import (
    CuboidObstacle,
    DegenerateSegment,
    ObstacleKind,
    Point3,
    SegmentDelta,
    pitch_angle,
    point_to_cuboid_distance,
    segment_delta,
    segment_intersects_cuboid,
    segment_length,
    turn_angle,
)
from .grid import AirspaceGrid, Face, NotAdjacent, OutOfAirspace
from .pso import (
    ConstraintParams,
    CostParams,
    NoFeasibleSeed,
    SwarmParams,
    build_seed_population,
    feasibility_penalty,
    optimize,
    trajectory_cost,
)
from .replan import RepairFailed, detect_conflicts, repair, should_replan
from .sampling import PlanningFailed, RrtParams, Waypath, birrt_plan, rrt_plan, smooth_and_resample
from .scenario import ParseError, Scenario, UavSpec, ValidationError, load_scenario, single_cell_scenario
from .sim import Mode, SimMetrics, UavPhase, World, run_scenario

__version__ = "0.1.0"
