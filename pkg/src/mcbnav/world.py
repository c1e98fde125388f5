"""Deterministic 2D navigation world.

Obstacle geometry, unicycle dynamics with exact-arc integration, raycast
lidar, disc collision checks, and seeded scenario randomization. Maps are
immutable after load and safe to share across concurrent rollouts.
"""
from __future__ import annotations

import importlib.resources
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .geometry import (
    is_convex_ccw,
    point_in_convex_polygon,
    point_polygon_distance,
    point_segment_distance,
    ray_circles_hits,
    ray_segments_hits,
    wrap_angle,
)

V_MAX = 0.5
W_MAX = math.pi / 2.0


class MapError(ValueError):
    """Malformed map description (bad geometry or obstacle outside bounds)."""


class ScenarioSamplingError(RuntimeError):
    """Rejection sampling could not place a collision-free start/goal pair."""


@dataclass(frozen=True)
class RobotPose:
    x: float
    y: float
    theta: float

    def __post_init__(self):
        object.__setattr__(self, "theta", wrap_angle(self.theta))


@dataclass(frozen=True)
class Action:
    """Velocity command: v in [0, V_MAX] m/s, w in [-W_MAX, W_MAX] rad/s."""

    v: float
    w: float


@dataclass(frozen=True)
class LidarConfig:
    n_beams: int = 24
    fov: float = math.radians(270.0)
    max_range: float = 6.0

    def beam_angles(self) -> np.ndarray:
        """Body-frame beam angles, indexed from the leftmost beam.

        A full-circle field of view spaces beams fov/n apart so the first
        and last beams do not coincide; otherwise endpoints are included.
        """
        if self.fov >= 2.0 * math.pi - 1e-9:
            step = self.fov / self.n_beams
        else:
            step = self.fov / (self.n_beams - 1) if self.n_beams > 1 else 0.0
        return self.fov / 2.0 - step * np.arange(self.n_beams)


@dataclass(frozen=True)
class LidarScan:
    ranges: np.ndarray
    max_range: float


@dataclass(frozen=True)
class Scenario:
    start: RobotPose
    goal: tuple[float, float]
    map_ref: str

    def to_dict(self) -> dict:
        return {
            "start": [self.start.x, self.start.y, self.start.theta],
            "goal": [self.goal[0], self.goal[1]],
            "map": self.map_ref,
        }


@dataclass(frozen=True)
class SimOutcome:
    next_pose: RobotPose
    collided: bool
    goal_reached: bool
    scan: LidarScan


@dataclass(frozen=True)
class WorldMap:
    name: str
    bounds: tuple[float, float, float, float]  # xmin, ymin, xmax, ymax
    circles: tuple[tuple[float, float, float], ...]  # (cx, cy, r)
    polygons: tuple[np.ndarray, ...]  # each (n, 2), convex CCW
    margin: float = 0.0
    # precomputed arrays for vectorized queries (boundary + polygon edges)
    seg_p: np.ndarray = field(repr=False, default=None)
    seg_e: np.ndarray = field(repr=False, default=None)
    circ_c: np.ndarray = field(repr=False, default=None)
    circ_r: np.ndarray = field(repr=False, default=None)


def _boundary_segments(bounds):
    xmin, ymin, xmax, ymax = bounds
    corners = [(xmin, ymin), (xmax, ymin), (xmax, ymax), (xmin, ymax)]
    segs = []
    for i in range(4):
        segs.append((corners[i], corners[(i + 1) % 4]))
    return segs


def load_map(spec: dict) -> WorldMap:
    """Build an immutable WorldMap from a structured description.

    Expected keys: ``bounds`` [xmin, ymin, xmax, ymax]; optional ``name``,
    ``margin``, ``circles`` (list of {center, radius}) and ``polygons``
    (list of {vertices}). All obstacles must lie inside the bounds.
    """
    try:
        bounds = tuple(float(v) for v in spec["bounds"])
    except (KeyError, TypeError, ValueError) as exc:
        raise MapError(f"missing or malformed bounds: {exc}") from exc
    if len(bounds) != 4 or bounds[0] >= bounds[2] or bounds[1] >= bounds[3]:
        raise MapError(f"bounds must be [xmin, ymin, xmax, ymax] with "
                       f"positive extent, got {bounds}")
    xmin, ymin, xmax, ymax = bounds

    circles = []
    for i, c in enumerate(spec.get("circles", []) or []):
        try:
            cx, cy = (float(v) for v in c["center"])
            r = float(c["radius"])
        except (KeyError, TypeError, ValueError) as exc:
            raise MapError(f"circle {i}: {exc}") from exc
        if r <= 0.0:
            raise MapError(f"circle {i}: radius must be positive, got {r}")
        if (cx - r < xmin or cx + r > xmax or cy - r < ymin or cy + r > ymax):
            raise MapError(f"circle {i} at ({cx}, {cy}) r={r} extends "
                           "outside bounds")
        circles.append((cx, cy, r))

    polygons = []
    for i, p in enumerate(spec.get("polygons", []) or []):
        try:
            verts = np.asarray(p["vertices"], dtype=float)
        except (KeyError, TypeError, ValueError) as exc:
            raise MapError(f"polygon {i}: {exc}") from exc
        if verts.ndim != 2 or verts.shape[1] != 2 or len(verts) < 3:
            raise MapError(f"polygon {i}: need an (n>=3, 2) vertex list")
        if not is_convex_ccw(verts):
            # accept CW input by reversing once
            verts = verts[::-1].copy()
            if not is_convex_ccw(verts):
                raise MapError(f"polygon {i}: vertices are not strictly convex")
        if (verts[:, 0].min() < xmin or verts[:, 0].max() > xmax
                or verts[:, 1].min() < ymin or verts[:, 1].max() > ymax):
            raise MapError(f"polygon {i} extends outside bounds")
        verts.setflags(write=False)
        polygons.append(verts)

    seg_list = _boundary_segments(bounds)
    for verts in polygons:
        n = len(verts)
        for k in range(n):
            seg_list.append((tuple(verts[k]), tuple(verts[(k + 1) % n])))
    seg_p = np.array([s[0] for s in seg_list], dtype=float)
    seg_q = np.array([s[1] for s in seg_list], dtype=float)
    circ_c = (np.array([(c[0], c[1]) for c in circles], dtype=float)
              if circles else np.zeros((0, 2)))
    circ_r = (np.array([c[2] for c in circles], dtype=float)
              if circles else np.zeros(0))
    seg_e = seg_q - seg_p
    for arr in (seg_p, seg_e, circ_c, circ_r):
        arr.setflags(write=False)

    return WorldMap(
        name=str(spec.get("name", "unnamed")),
        bounds=bounds,
        circles=tuple(circles),
        polygons=tuple(polygons),
        margin=float(spec.get("margin", 0.0)),
        seg_p=seg_p,
        seg_e=seg_e,
        circ_c=circ_c,
        circ_r=circ_r,
    )


def load_map_file(path: str | Path) -> WorldMap:
    with open(path) as fh:
        spec = yaml.safe_load(fh)
    if not isinstance(spec, dict):
        raise MapError(f"{path}: map file must contain a mapping")
    spec.setdefault("name", Path(path).stem)
    return load_map(spec)


def builtin_map_path(name: str) -> Path:
    base = importlib.resources.files("mcbnav") / "maps" / f"{name}.yaml"
    path = Path(str(base))
    if not path.exists():
        raise MapError(f"no builtin map named {name!r}")
    return path


def resolve_map(ref: str) -> WorldMap:
    """Load a map by builtin id or filesystem path."""
    p = Path(ref)
    if p.suffix in (".yaml", ".yml") or p.exists():
        return load_map_file(p)
    return load_map_file(builtin_map_path(ref))


def boundary_clearance(world: WorldMap, x: float, y: float) -> float:
    xmin, ymin, xmax, ymax = world.bounds
    return min(x - xmin, xmax - x, y - ymin, ymax - y)


def obstacle_clearance(world: WorldMap, x: float, y: float) -> float:
    """Distance from a point to the nearest obstacle surface (0 inside)."""
    best = math.inf
    for cx, cy, r in world.circles:
        best = min(best, max(0.0, math.hypot(x - cx, y - cy) - r))
    for verts in world.polygons:
        best = min(best, point_polygon_distance(x, y, verts))
    return best


def check_collision(world: WorldMap, pose: RobotPose, radius: float) -> bool:
    """True iff the robot disc intersects any obstacle or the boundary."""
    x, y = pose.x, pose.y
    if boundary_clearance(world, x, y) < radius:
        return True
    for cx, cy, r in world.circles:
        if math.hypot(x - cx, y - cy) < radius + r:
            return True
    for verts in world.polygons:
        if point_in_convex_polygon(x, y, verts):
            return True
        if point_polygon_distance(x, y, verts) < radius:
            return True
    return False


def step_dynamics(pose: RobotPose, action: Action, dt: float) -> RobotPose:
    """Exact-arc unicycle step; heading renormalized to (-pi, pi]."""
    v, w = action.v, action.w
    if abs(w) < 1e-12:
        return RobotPose(pose.x + v * dt * math.cos(pose.theta),
                         pose.y + v * dt * math.sin(pose.theta),
                         pose.theta)
    radius = v / w
    th1 = pose.theta + w * dt
    return RobotPose(pose.x + radius * (math.sin(th1) - math.sin(pose.theta)),
                     pose.y - radius * (math.cos(th1) - math.cos(pose.theta)),
                     th1)


def raycast_scan(world: WorldMap, pose: RobotPose,
                 cfg: LidarConfig) -> LidarScan:
    """Per-beam first-hit distances, clamped to max_range.

    Beams are evenly spaced over the field of view and indexed from the
    leftmost beam angle. Readings are floored at a tiny positive value so
    scans from contact poses stay strictly positive.
    """
    angles = pose.theta + cfg.beam_angles()
    dirs = np.column_stack([np.cos(angles), np.sin(angles)])
    origin = np.array([pose.x, pose.y])
    t_seg = ray_segments_hits(origin, dirs, world.seg_p, world.seg_e)
    t_circ = ray_circles_hits(origin, dirs, world.circ_c, world.circ_r)
    ranges = np.minimum(t_seg, t_circ)
    ranges = np.minimum(ranges, cfg.max_range)
    ranges = np.maximum(ranges, 1e-6)
    ranges.setflags(write=False)
    return LidarScan(ranges=ranges, max_range=cfg.max_range)


def advance(world: WorldMap, pose: RobotPose, action: Action, dt: float,
            radius: float, goal: tuple[float, float], goal_radius: float,
            lidar: LidarConfig, n_substeps: int = 10) -> SimOutcome:
    """Integrate one control period with swept collision/goal checks.

    Motion is split into substeps; if a substep pose collides, translation
    is clamped at the last collision-free substep while the commanded
    heading update is still applied (the robot stops against the obstacle
    but keeps turning). Goal entry is only registered at collision-free
    substep poses, so whichever event occurs first along the sweep wins.
    """
    sub_dt = dt / n_substeps
    theta_end = wrap_angle(pose.theta + action.w * dt)
    current = pose
    collided = False
    goal_reached = False
    for _ in range(n_substeps):
        candidate = step_dynamics(current, action, sub_dt)
        if check_collision(world, candidate, radius):
            collided = True
            break
        current = candidate
        if math.hypot(current.x - goal[0], current.y - goal[1]) <= goal_radius:
            goal_reached = True
            break
    if collided:
        next_pose = RobotPose(current.x, current.y, theta_end)
    else:
        next_pose = current
    scan = raycast_scan(world, next_pose, lidar)
    return SimOutcome(next_pose=next_pose, collided=collided,
                      goal_reached=goal_reached, scan=scan)


@dataclass(frozen=True)
class SimParams:
    """Stepping parameters shared by training rollouts and evaluation."""

    dt: float = 0.2
    robot_radius: float = 0.17
    goal_radius: float = 0.3
    n_substeps: int = 10
    lidar: LidarConfig = field(default_factory=LidarConfig)


@dataclass(frozen=True)
class ScenarioConfig:
    robot_radius: float = 0.17
    goal_radius: float = 0.3
    min_start_goal_dist: float = 2.0
    max_attempts: int = 2000


def _sample_free_point(world: WorldMap, rng: np.random.Generator,
                       clearance: float, attempts: int):
    xmin, ymin, xmax, ymax = world.bounds
    for _ in range(attempts):
        x = rng.uniform(xmin + clearance, xmax - clearance)
        y = rng.uniform(ymin + clearance, ymax - clearance)
        if not check_collision(world, RobotPose(x, y, 0.0), clearance):
            return x, y
    return None


def sample_scenario(world: WorldMap, rng: np.random.Generator,
                    cfg: ScenarioConfig = ScenarioConfig()) -> Scenario:
    """Draw a collision-free start pose and goal with rejection sampling.

    Identical generator state yields identical scenarios. Raises
    ScenarioSamplingError when the map is too dense to place the pair.
    """
    clearance = cfg.robot_radius + world.margin
    per_point_attempts = 50
    for _ in range(cfg.max_attempts // per_point_attempts):
        start = _sample_free_point(world, rng, clearance, per_point_attempts)
        if start is None:
            continue
        goal = _sample_free_point(world, rng, clearance, per_point_attempts)
        if goal is None:
            continue
        if math.hypot(goal[0] - start[0], goal[1] - start[1]) \
                < cfg.min_start_goal_dist:
            continue
        theta = rng.uniform(-math.pi, math.pi)
        return Scenario(start=RobotPose(start[0], start[1], theta),
                        goal=goal, map_ref=world.name)
    raise ScenarioSamplingError(
        f"could not sample a free start/goal pair on map {world.name!r} "
        f"after {cfg.max_attempts} attempts")
