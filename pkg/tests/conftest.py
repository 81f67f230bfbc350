import numpy as np
import pytest

from skygrid.geometry import CuboidObstacle, ObstacleKind, Point3


@pytest.fixture
def rng():
    return np.random.default_rng(0)


@pytest.fixture
def reference_obstacle():
    """The worked-example building: anchor (2, 2, 0), edges 2 x 3 x 4."""
    return CuboidObstacle(anchor=Point3(2.0, 2.0, 0.0), len_x=2.0, len_y=3.0, len_z=4.0)


def dense_sample_penetrates(waypoints, obstacles, step=0.1):
    """Independent collision oracle: walk every segment at `step` resolution
    and report whether any sample lies strictly inside any obstacle."""
    waypoints = np.asarray(waypoints, dtype=float)
    if len(obstacles) == 0 or len(waypoints) < 2:
        return False
    lo = np.stack([ob.lo for ob in obstacles])
    hi = np.stack([ob.hi for ob in obstacles])
    for a, b in zip(waypoints[:-1], waypoints[1:]):
        seg_len = float(np.linalg.norm(b - a))
        n = max(2, int(np.ceil(seg_len / step)) + 1)
        t = np.linspace(0.0, 1.0, n)[:, None]
        pts = a * (1 - t) + b * t  # (n, 3)
        inside = (pts[:, None, :] > lo) & (pts[:, None, :] < hi)
        if inside.all(axis=2).any():
            return True
    return False


def exhaustive_min_cost(grid, cost_of, start, goal):
    """Independent coarse-planning oracle: depth-first enumeration of simple
    cell paths with branch-and-bound pruning; returns the minimum summed node
    cost from start to goal (both included)."""
    best = [float("inf")]

    def dfs(cell, visited, cost):
        if cost >= best[0]:
            return
        if cell == goal:
            best[0] = cost
            return
        for nb in grid.neighbors(cell):
            if nb not in visited:
                dfs(nb, visited | {nb}, cost + cost_of(nb))

    dfs(start, {start}, cost_of(start))
    return best[0]


def make_sudden(center, side=6.0):
    """Axis-aligned sudden-obstacle cube centered on a point (clipped to z>=0)."""
    cx, cy, cz = float(center[0]), float(center[1]), float(center[2])
    z0 = max(0.0, cz - side / 2)
    return CuboidObstacle(
        anchor=Point3(cx - side / 2, cy - side / 2, z0),
        len_x=side,
        len_y=side,
        len_z=side,
        kind=ObstacleKind.SUDDEN,
        id="sudden",
    )
