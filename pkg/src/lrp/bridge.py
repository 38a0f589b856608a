"""Robot facade exposed to action blocks.

`RobulabBridge` is the single host object a behavior program talks to.
Motion methods wrap `/command_velocity` publishes; obstacle predicates
read the most recent `/laser` message and never publish anything, so
guards stay side-effect-free. Expression code reaches the bridge
through `receive_message`, e.g. `robulab forward: f_vel` or
`robulab isThereARightObstacle: min_distance`.

Sector convention, relative to the heading: front spans [-45, +45]
degrees; front-right is [-45, 0) and front-left [0, +45], so the two
half-sectors partition the front arc with the straight-ahead beam
counted as left.
"""

from __future__ import annotations

import math
from typing import Callable

from .bus import Bus, Node
from .diagnostics import Diagnostic
from .errors import BusError, EvalError

__all__ = ["RobulabBridge", "SECTOR_HALF_DEG"]

SECTOR_HALF_DEG = 45


class RobulabBridge:
    def __init__(
        self,
        bus: Bus,
        cmd_topic: str = "/command_velocity",
        laser_topic: str = "/laser",
        pose_topic: str = "/pose",
        on_diagnostic: Callable[[Diagnostic], None] | None = None,
    ):
        self.bus = bus
        self.cmd_topic = cmd_topic
        self.command_count = 0
        self.latest_scan: dict | None = None
        self.latest_pose: dict | None = None
        self._on_diagnostic = on_diagnostic
        self._warned_no_scan = False
        self.node: Node = bus.create_node("robulab")
        bus.subscribe(self.node, laser_topic, self._on_laser)
        bus.subscribe(self.node, pose_topic, self._on_pose)
        bus.start(self.node)

    # -- bus callbacks -------------------------------------------------------

    def _on_laser(self, message) -> None:
        self.latest_scan = message.payload

    def _on_pose(self, message) -> None:
        self.latest_pose = message.payload

    # -- motion commands -----------------------------------------------------

    def forward(self, linear_speed: float) -> None:
        self._command({"linear": float(linear_speed), "angular": 0.0})

    def turn(self, angular_speed: float) -> None:
        self._command({"linear": 0.0, "angular": float(angular_speed)})

    def stop(self) -> None:
        self._command({"linear": 0.0, "angular": 0.0})

    def _command(self, payload: dict) -> None:
        try:
            self.bus.publish(self.node, self.cmd_topic, payload)
        except BusError as exc:
            self._diag(f"command dropped: {exc}")
            return
        self.command_count += 1

    # -- obstacle predicates ---------------------------------------------------

    def sector_obstacle(self, sector: str, minimum_distance: float) -> bool:
        """True iff any beam in the sector reads at or under the distance.

        Before the first scan arrives this is false, with a one-time
        diagnostic.
        """
        scan = self.latest_scan
        if scan is None:
            if not self._warned_no_scan:
                self._warned_no_scan = True
                self._diag("no laser scan received yet; obstacle predicates report false", severity="warning")
            return False
        lo, hi = self._sector_indices(sector, scan)
        ranges = scan["ranges"]
        return any(ranges[k] <= minimum_distance for k in range(lo, hi))

    @staticmethod
    def _sector_indices(sector: str, scan: dict) -> tuple[int, int]:
        # index arithmetic instead of float angle comparison: the center
        # beam must land in exactly one half-sector
        increment = scan["angle_increment"]
        center = round(-scan["angle_min"] / increment)
        half = round(math.radians(SECTOR_HALF_DEG) / increment)
        count = len(scan["ranges"])
        if sector == "front":
            lo, hi = center - half, center + half + 1
        elif sector == "front-right":
            lo, hi = center - half, center
        elif sector == "front-left":
            lo, hi = center, center + half + 1
        else:
            raise ValueError(f"unknown sector: {sector}")
        return max(lo, 0), min(hi, count)

    # -- message dispatch ---------------------------------------------------------

    def receive_message(self, selector: str, args: list) -> object:
        if selector == "stop":
            self._require(selector, args, 0)
            self.stop()
            return None
        if selector == "forward:":
            self.forward(self._number(selector, args))
            return None
        if selector == "turn:":
            self.turn(self._number(selector, args))
            return None
        if selector == "isThereAnObstacle:":
            return self.sector_obstacle("front", self._number(selector, args))
        if selector == "isThereARightObstacle:":
            return self.sector_obstacle("front-right", self._number(selector, args))
        if selector == "isThereALeftObstacle:":
            return self.sector_obstacle("front-left", self._number(selector, args))
        raise EvalError(f"robot bridge does not understand '{selector}'")

    @staticmethod
    def _require(selector: str, args: list, expected: int) -> None:
        if len(args) != expected:
            raise EvalError(f"'{selector}' takes {expected} argument(s), got {len(args)}")

    def _number(self, selector: str, args: list) -> float:
        self._require(selector, args, 1)
        value = args[0]
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise EvalError(f"'{selector}' expects a number, got {type(value).__name__}")
        return float(value)

    def _diag(self, message: str, severity: str = "error") -> None:
        if self._on_diagnostic is not None:
            self._on_diagnostic(Diagnostic(message=message, severity=severity, source="bridge", where="robulab"))
