"""2D unicycle robot in a segment-obstacle world, with a laser scanner.

The robot integrates v/omega commands with fixed-step forward Euler,
locked to the session tick. A step that would push the robot disc into
a wall clamps at the contact point and latches the sticky `collided`
flag. The laser covers 270 degrees at 1-degree resolution (271 beams)
out to 30 m; beams that hit nothing read exactly the maximum range.

The `Driver` node closes the loop over the bus: it consumes
`/command_velocity`, applies the latest command once per simulation
tick, steps the robot, then publishes `/pose` and `/laser`. Commands
persist until replaced - behaviors send them on state entry, so a
watchdog would stop the robot between entries.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Callable

import numpy as np

from .diagnostics import Diagnostic
from .errors import SessionSetupError

__all__ = [
    "LASER_BEAMS",
    "LASER_ANGLE_MIN",
    "LASER_ANGLE_INCREMENT",
    "LASER_RANGE_MAX",
    "RobotState",
    "World",
    "LaserScan",
    "Driver",
    "step",
    "raycast",
    "scan",
    "run_driver",
    "load_world",
]

LASER_BEAMS = 271
LASER_ANGLE_MIN = math.radians(-135.0)
LASER_ANGLE_INCREMENT = math.radians(1.0)
LASER_RANGE_MAX = 30.0

_RAY_EPS = 1e-9  # intersections closer than this are the sensor itself


@dataclass
class RobotState:
    x: float = 0.0
    y: float = 0.0
    theta: float = 0.0  # normalized to (-pi, pi]
    v: float = 0.0
    omega: float = 0.0
    radius: float = 0.25
    collided: bool = False  # sticky until the world is reset


@dataclass(frozen=True)
class World:
    segments: tuple[tuple[float, float, float, float], ...] = ()
    bounds: tuple[float, float, float, float] | None = None

    def __post_init__(self):
        for seg in self.segments:
            x1, y1, x2, y2 = seg
            if not all(math.isfinite(c) for c in seg):
                raise ValueError(f"segment has non-finite coordinates: {seg}")
            if x1 == x2 and y1 == y2:
                raise ValueError(f"degenerate segment: {seg}")

    @cached_property
    def _arrays(self) -> tuple[np.ndarray, np.ndarray]:
        if not self.segments:
            empty = np.empty((0, 2))
            return empty, empty
        a = np.array([(s[0], s[1]) for s in self.segments], dtype=float)
        b = np.array([(s[2], s[3]) for s in self.segments], dtype=float)
        return a, b


@dataclass(frozen=True)
class LaserScan:
    angle_min: float = LASER_ANGLE_MIN
    angle_increment: float = LASER_ANGLE_INCREMENT
    range_max: float = LASER_RANGE_MAX
    ranges: tuple[float, ...] = ()

    def payload(self) -> dict:
        return {
            "angle_min": self.angle_min,
            "angle_increment": self.angle_increment,
            "range_max": self.range_max,
            "ranges": list(self.ranges),
        }


# ---------------------------------------------------------------------------
# Geometry


def _ray_ranges(world: World, origin: tuple[float, float], angles: np.ndarray) -> np.ndarray:
    """Nearest ray-segment hit per angle, capped at the laser range."""
    a, b = world._arrays
    if a.shape[0] == 0:
        return np.full(angles.shape, LASER_RANGE_MAX)
    ox, oy = origin
    dx = np.cos(angles)[:, None]
    dy = np.sin(angles)[:, None]
    ex = (b[:, 0] - a[:, 0])[None, :]
    ey = (b[:, 1] - a[:, 1])[None, :]
    aox = (a[:, 0] - ox)[None, :]
    aoy = (a[:, 1] - oy)[None, :]
    denom = dx * ey - dy * ex
    with np.errstate(divide="ignore", invalid="ignore"):
        t = (aox * ey - aoy * ex) / denom
        s = (aox * dy - aoy * dx) / denom
    hit = (np.abs(denom) > 0.0) & (t >= _RAY_EPS) & (s >= 0.0) & (s <= 1.0)
    t = np.where(hit, t, np.inf)
    return np.minimum(t.min(axis=1), LASER_RANGE_MAX)


def raycast(world: World, origin: tuple[float, float], angle: float) -> float:
    """Distance to the nearest obstacle along one ray, capped at 30 m."""
    return float(_ray_ranges(world, origin, np.array([angle]))[0])


def scan(world: World, robot: RobotState) -> LaserScan:
    """Full 271-beam sweep around the robot's heading."""
    angles = robot.theta + LASER_ANGLE_MIN + LASER_ANGLE_INCREMENT * np.arange(LASER_BEAMS)
    ranges = _ray_ranges(world, (robot.x, robot.y), angles)
    return LaserScan(ranges=tuple(float(r) for r in ranges))


def _point_segment_dist(px: float, py: float, seg: tuple[float, float, float, float]) -> float:
    x1, y1, x2, y2 = seg
    ex, ey = x2 - x1, y2 - y1
    length_sq = ex * ex + ey * ey
    u = ((px - x1) * ex + (py - y1) * ey) / length_sq
    u = min(1.0, max(0.0, u))
    cx, cy = x1 + u * ex, y1 + u * ey
    return math.hypot(px - cx, py - cy)


def _clearance(px: float, py: float, world: World) -> float:
    return min((_point_segment_dist(px, py, seg) for seg in world.segments), default=math.inf)


def _segments_distance(p0: tuple[float, float], p1: tuple[float, float],
                       seg: tuple[float, float, float, float]) -> float:
    # two non-degenerate segments: zero if they properly cross, else the
    # closest endpoint-to-segment distance
    x1, y1, x2, y2 = seg
    path = (p0[0], p0[1], p1[0], p1[1])

    def orient(ax, ay, bx, by, cx, cy):
        return (bx - ax) * (cy - ay) - (by - ay) * (cx - ax)

    o1 = orient(p0[0], p0[1], p1[0], p1[1], x1, y1)
    o2 = orient(p0[0], p0[1], p1[0], p1[1], x2, y2)
    o3 = orient(x1, y1, x2, y2, p0[0], p0[1])
    o4 = orient(x1, y1, x2, y2, p1[0], p1[1])
    if o1 * o2 < 0 and o3 * o4 < 0:
        return 0.0
    return min(
        _point_segment_dist(x1, y1, path),
        _point_segment_dist(x2, y2, path),
        _point_segment_dist(p0[0], p0[1], seg),
        _point_segment_dist(p1[0], p1[1], seg),
    )


def step(robot: RobotState, world: World, dt: float) -> RobotState:
    """One forward-Euler step; clamps at obstacle contact.

    Translation uses the pre-step heading; heading then advances by
    omega*dt and is re-normalized. Commanded velocities persist.
    """
    if dt <= 0:
        raise ValueError(f"dt must be positive, got {dt}")
    x0, y0 = robot.x, robot.y
    x1 = x0 + robot.v * math.cos(robot.theta) * dt
    y1 = y0 + robot.v * math.sin(robot.theta) * dt
    if world.segments and (x1 != x0 or y1 != y0):
        swept = min(_segments_distance((x0, y0), (x1, y1), seg) for seg in world.segments)
        if swept < robot.radius:
            lo, hi = 0.0, 1.0  # clearance(lo) >= radius is the loop invariant
            for _ in range(80):
                mid = 0.5 * (lo + hi)
                mx = x0 + (x1 - x0) * mid
                my = y0 + (y1 - y0) * mid
                if _clearance(mx, my, world) >= robot.radius:
                    lo = mid
                else:
                    hi = mid
            x1 = x0 + (x1 - x0) * lo
            y1 = y0 + (y1 - y0) * lo
            robot.collided = True
    robot.x, robot.y = x1, y1
    robot.theta = _normalize_angle(robot.theta + robot.omega * dt)
    return robot


def _normalize_angle(theta: float) -> float:
    theta = math.fmod(theta, 2.0 * math.pi)
    if theta <= -math.pi:
        theta += 2.0 * math.pi
    elif theta > math.pi:
        theta -= 2.0 * math.pi
    return theta


# ---------------------------------------------------------------------------
# Driver node


class Driver:
    """Bus node simulating the robot: commands in, pose and laser out."""

    def __init__(
        self,
        bus,
        world: World,
        robot: RobotState,
        dt: float,
        cmd_topic: str = "/command_velocity",
        pose_topic: str = "/pose",
        laser_topic: str = "/laser",
        on_diagnostic: Callable[[Diagnostic], None] | None = None,
    ):
        self.bus = bus
        self.world = world
        self.robot = robot
        self.dt = dt
        self.pose_topic = pose_topic
        self.laser_topic = laser_topic
        self.last_scan: LaserScan | None = None
        self._pending_cmd: tuple[float, float] | None = None
        self._initial_pose = (robot.x, robot.y, robot.theta)
        self._on_diagnostic = on_diagnostic
        self.node = bus.create_node("driver")
        bus.subscribe(self.node, cmd_topic, self._on_command)
        bus.start(self.node)

    def _on_command(self, message) -> None:
        payload = message.payload
        linear = payload.get("linear") if isinstance(payload, dict) else None
        angular = payload.get("angular") if isinstance(payload, dict) else None
        ok = (
            isinstance(linear, (int, float)) and not isinstance(linear, bool) and math.isfinite(linear)
            and isinstance(angular, (int, float)) and not isinstance(angular, bool) and math.isfinite(angular)
        )
        if not ok:
            if self._on_diagnostic is not None:
                self._on_diagnostic(Diagnostic(
                    message=f"malformed velocity command ignored: {payload!r}",
                    source="sim", where="driver",
                ))
            return
        self._pending_cmd = (float(linear), float(angular))

    def sim_tick(self) -> None:
        """Apply the latest command, step, publish pose then laser."""
        if self.node.lifecycle != "running":
            return
        if self._pending_cmd is not None:
            self.robot.v, self.robot.omega = self._pending_cmd
            self._pending_cmd = None
        step(self.robot, self.world, self.dt)
        self.bus.publish(self.node, self.pose_topic,
                         {"x": self.robot.x, "y": self.robot.y, "theta": self.robot.theta})
        self.last_scan = scan(self.world, self.robot)
        self.bus.publish(self.node, self.laser_topic, self.last_scan.payload())

    def reset_world(self) -> None:
        """Restore the initial pose and clear the collision latch."""
        self.robot.x, self.robot.y, self.robot.theta = self._initial_pose
        self.robot.collided = False


def run_driver(bus, world: World, robot: RobotState, dt: float,
               on_diagnostic: Callable[[Diagnostic], None] | None = None) -> Driver:
    return Driver(bus, world, robot, dt, on_diagnostic=on_diagnostic)


# ---------------------------------------------------------------------------
# World files


def load_world(path: str) -> tuple[World, RobotState]:
    """Read a JSON world file: segment list plus initial robot pose."""
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise SessionSetupError(f"cannot read world file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise SessionSetupError(f"world file {path} is not valid JSON: {exc}") from exc
    try:
        segments = tuple(tuple(float(c) for c in seg) for seg in doc.get("segments", []))
        pose = doc.get("robot", {})
        robot = RobotState(
            x=float(pose.get("x", 0.0)),
            y=float(pose.get("y", 0.0)),
            theta=float(pose.get("theta", 0.0)),
            radius=float(pose.get("radius", 0.25)),
        )
        bounds = tuple(float(c) for c in doc["bounds"]) if "bounds" in doc else None
        world = World(segments=segments, bounds=bounds)  # type: ignore[arg-type]
    except (TypeError, ValueError, KeyError) as exc:
        raise SessionSetupError(f"world file {path} is malformed: {exc}") from exc
    return world, robot
