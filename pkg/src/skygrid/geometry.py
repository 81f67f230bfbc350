"""Geometric primitives: points, cuboid obstacles, angles, and collision tests.

All distances are in meters, angles in degrees. Every function here is a
pure function of its arguments.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Iterable

import numpy as np


class DegenerateSegment(Exception):
    """Raised when an angle is requested for a segment with no usable direction."""


class ObstacleKind(Enum):
    STATIC = "static"
    SUDDEN = "sudden"


@dataclass(frozen=True)
class Point3:
    """A position in airspace-local coordinates."""

    x: float
    y: float
    z: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y) and math.isfinite(self.z)):
            raise ValueError(f"non-finite coordinate in {(self.x, self.y, self.z)}")

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z], dtype=float)

    @staticmethod
    def from_array(a) -> "Point3":
        return Point3(float(a[0]), float(a[1]), float(a[2]))


@dataclass(frozen=True)
class SegmentDelta:
    """Componentwise difference between two consecutive waypoints."""

    qx: float
    qy: float
    qz: float


@dataclass(frozen=True)
class CuboidObstacle:
    """Axis-aligned box given by the corner nearest the origin plus edge lengths.

    Static obstacles are grounded buildings (anchor.z == 0); sudden obstacles
    may float.
    """

    anchor: Point3
    len_x: float
    len_y: float
    len_z: float
    kind: ObstacleKind = ObstacleKind.STATIC
    id: str = ""

    def __post_init__(self):
        if self.len_x <= 0 or self.len_y <= 0 or self.len_z <= 0:
            raise ValueError("cuboid edge lengths must be positive")
        if self.kind is ObstacleKind.STATIC and self.anchor.z != 0:
            raise ValueError("static obstacle must be grounded (anchor.z == 0)")
        if self.anchor.z < 0:
            raise ValueError("obstacle anchor.z must be >= 0")

    @property
    def lo(self) -> np.ndarray:
        return self.anchor.as_array()

    @property
    def hi(self) -> np.ndarray:
        return self.anchor.as_array() + np.array([self.len_x, self.len_y, self.len_z])

    @property
    def center(self) -> Point3:
        c = (self.lo + self.hi) / 2.0
        return Point3.from_array(c)


def segment_delta(a: Point3, b: Point3) -> SegmentDelta:
    """Vector from waypoint a to waypoint b."""
    return SegmentDelta(b.x - a.x, b.y - a.y, b.z - a.z)


def segment_length(d: SegmentDelta) -> float:
    """Euclidean length of a segment delta."""
    return math.sqrt(d.qx * d.qx + d.qy * d.qy + d.qz * d.qz)


def turn_angle(prev: SegmentDelta, nxt: SegmentDelta) -> float:
    """Angle in [0, 180] degrees between the horizontal projections of two segments.

    Raises DegenerateSegment for purely vertical segments (no horizontal
    heading to compare); callers treat that as a constraint violation.
    """
    na = math.hypot(prev.qx, prev.qy)
    nb = math.hypot(nxt.qx, nxt.qy)
    if na == 0.0 or nb == 0.0:
        raise DegenerateSegment("purely vertical segment has no horizontal heading")
    dot = (prev.qx * nxt.qx + prev.qy * nxt.qy) / (na * nb)
    dot = max(-1.0, min(1.0, dot))
    return math.degrees(math.acos(dot))


def pitch_angle(d: SegmentDelta) -> float:
    """Climb angle in [-90, 90] degrees of a single segment."""
    length = segment_length(d)
    if length == 0.0:
        raise DegenerateSegment("zero-length segment has no pitch")
    s = max(-1.0, min(1.0, d.qz / length))
    return math.degrees(math.asin(s))


def point_to_cuboid_distance(p: Point3, ob: CuboidObstacle) -> float:
    """Distance from a point to the nearest point of the cuboid (0 if inside).

    Clamping the point to the box collapses the per-region case analysis into
    one formula.
    """
    q = p.as_array()
    clamped = np.clip(q, ob.lo, ob.hi)
    return float(np.linalg.norm(q - clamped))


def points_to_cuboids_distance(points: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    """Batched clamp-to-box distances.

    points: (..., 3); lo, hi: (K, 3) stacked cuboid corners.
    Returns distances of shape (..., K).
    """
    p = points[..., None, :]
    clamped = np.clip(p, lo, hi)
    return np.linalg.norm(p - clamped, axis=-1)


def segment_intersects_cuboid(a: Point3, b: Point3, ob: CuboidObstacle, margin: float = 0.0) -> bool:
    """True iff segment a-b comes within `margin` of the cuboid.

    Slab test against the cuboid inflated by `margin` on every face.
    """
    if margin < 0:
        raise ValueError("margin must be >= 0")
    return bool(
        segments_intersect_cuboids(
            a.as_array()[None, :],
            b.as_array()[None, :],
            ob.lo[None, :],
            ob.hi[None, :],
            margin,
        )[0]
    )


def segments_intersect_cuboids(
    starts: np.ndarray,
    ends: np.ndarray,
    lo: np.ndarray,
    hi: np.ndarray,
    margin: float = 0.0,
) -> np.ndarray:
    """Batched slab test: does segment i hit any of the K inflated cuboids?

    starts, ends: (S, 3); lo, hi: (K, 3). Returns a boolean array of shape (S,).
    """
    if len(lo) == 0:
        return np.zeros(len(starts), dtype=bool)
    lo_m = lo - margin
    hi_m = hi + margin
    a = starts[:, None, :]  # (S, 1, 3)
    d = ends[:, None, :] - a  # (S, 1, 3)
    with np.errstate(divide="ignore", invalid="ignore"):
        t0 = (lo_m[None, :, :] - a) / d
        t1 = (hi_m[None, :, :] - a) / d
    t_near = np.minimum(t0, t1)
    t_far = np.maximum(t0, t1)
    # Degenerate axes (d == 0): inside the slab iff lo <= a <= hi.
    zero = d == 0
    inside = (a >= lo_m[None, :, :]) & (a <= hi_m[None, :, :])
    t_near = np.where(zero, np.where(inside, -np.inf, np.inf), t_near)
    t_far = np.where(zero, np.where(inside, np.inf, -np.inf), t_far)
    enter = np.max(t_near, axis=-1)
    exit_ = np.min(t_far, axis=-1)
    hit = (enter <= exit_) & (exit_ >= 0.0) & (enter <= 1.0)
    return hit.any(axis=1)


def path_is_collision_free(
    waypoints: np.ndarray, obstacles: Iterable[CuboidObstacle], margin: float = 0.0
) -> bool:
    """Check every consecutive segment of a waypoint array against all obstacles."""
    obs = list(obstacles)
    if not obs or len(waypoints) < 2:
        return True
    lo = np.stack([o.lo for o in obs])
    hi = np.stack([o.hi for o in obs])
    hits = segments_intersect_cuboids(waypoints[:-1], waypoints[1:], lo, hi, margin)
    return not bool(hits.any())


def obstacle_arrays(obstacles: Iterable[CuboidObstacle]) -> tuple[np.ndarray, np.ndarray]:
    """Stack obstacle corners into (K, 3) lo/hi arrays for the batched tests."""
    obs = list(obstacles)
    if not obs:
        return np.zeros((0, 3)), np.zeros((0, 3))
    return np.stack([o.lo for o in obs]), np.stack([o.hi for o in obs])
