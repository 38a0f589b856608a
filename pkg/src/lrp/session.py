"""Session orchestration.

A session wires the whole system together: bus, driver node, bridge,
interpreter, source watcher, trace log and the optional snapshot
server. Each session tick drains the command queue, ticks the
interpreter (guards see the previous tick's scan), then ticks the
driver (applies the newest command, steps physics, publishes pose and
laser).

Two clocks: `wallclock` mode paces ticks in real time and watches the
source file by default; `virtual` mode runs a fixed number of ticks as
fast as possible and is fully deterministic - identical config plus an
identical script yields a byte-identical trace.
"""

from __future__ import annotations

import json
import logging
import queue
import socket
import threading
import time
from collections import deque
from dataclasses import dataclass
from typing import Callable

from .actions import SingletonFactory
from .bridge import RobulabBridge
from .bus import Bus
from .diagnostics import Diagnostic
from .errors import ParseError, SessionSetupError
from .interpreter import DEFAULT_TICK_MS, Interpreter
from .liveupdate import REJECTED_PARSE_ERROR, SourceWatcher, apply_source
from .parser import parse_program
from .protocol import encode_frame, read_frame
from .sim import Driver, RobotState, World, load_world
from .trace import TraceLog

__all__ = ["SessionConfig", "Session", "run_session"]

logger = logging.getLogger(__name__)

WALLCLOCK = "wallclock"
VIRTUAL = "virtual"

SNAPSHOT_PERIOD_S = 0.1
SCAN_DECIMATION = 5


@dataclass
class SessionConfig:
    program_path: str | None = None
    world_path: str | None = None
    tick_ms: int = DEFAULT_TICK_MS
    mode: str = WALLCLOCK
    max_ticks: int | None = None
    trace_path: str | None = None
    serve_port: int | None = None
    script_path: str | None = None
    watch: bool | None = None  # default: on for wallclock, off for virtual

    def __post_init__(self):
        if self.mode not in (WALLCLOCK, VIRTUAL):
            raise SessionSetupError(f"unknown mode: {self.mode}")
        if self.mode == VIRTUAL and self.max_ticks is None:
            raise SessionSetupError("virtual mode requires a tick budget (max_ticks)")
        if self.tick_ms <= 0:
            raise SessionSetupError("tick_ms must be positive")

    @property
    def watch_enabled(self) -> bool:
        if self.watch is not None:
            return self.watch
        return self.mode == WALLCLOCK and self.program_path is not None


class Session:
    def __init__(
        self,
        config: SessionConfig,
        program_text: str | None = None,
        world: World | None = None,
        robot: RobotState | None = None,
    ):
        self.config = config
        self.tick_index = 0
        self.paused = False
        self.collided = False
        self._stop = False
        self._lock = threading.RLock()
        self._queue: "queue.Queue[tuple[dict, Callable[[dict], None] | None]]" = queue.Queue()
        self._recent_diags: deque[dict] = deque(maxlen=50)
        self._transitioned = False
        self._last_push = 0.0

        if program_text is None:
            if config.program_path is None:
                raise SessionSetupError("no program given")
            try:
                with open(config.program_path, encoding="utf-8") as fh:
                    program_text = fh.read()
            except OSError as exc:
                raise SessionSetupError(f"cannot read program file: {exc}") from exc
        if world is None:
            if config.world_path is None:
                raise SessionSetupError("no world given")
            world, robot = load_world(config.world_path)
        elif robot is None:
            robot = RobotState()

        self.world = world
        self.current_source = program_text

        self.trace = TraceLog(config.trace_path)
        self.trace.emit(0, "meta", {
            "version": 1,
            "tick_ms": config.tick_ms,
            "mode": config.mode,
            "max_ticks": config.max_ticks,
            "diagnostic_dedup": "guard diagnostics are deduplicated per failing guard per tick",
        })

        self.bus = Bus(on_event=self._on_bus_event)
        self.driver = Driver(self.bus, world, robot, dt=config.tick_ms / 1000.0, on_diagnostic=self._diag)
        self.bridge = RobulabBridge(self.bus, on_diagnostic=self._diag)
        registry = {"RobulabBridge": SingletonFactory(lambda: self.bridge)}

        # a program that does not parse at launch starts an empty session:
        # the file stays watched, so fixing it brings the machines up live
        try:
            program = parse_program(program_text)
        except ParseError as exc:
            program = parse_program("")
            self._diag(Diagnostic(message=exc.message, source="parse", line=exc.line, col=exc.col))
        for diag in program.diagnostics:
            self._diag(diag)

        self.interpreter = Interpreter(
            program,
            host_registry=registry,
            tick_ms=config.tick_ms,
            on_diagnostic=self._diag,
            on_transition=self._on_transition,
        )
        self.interpreter.start()

        self._script = self._load_script(config.script_path) if config.script_path else {}

        self.watcher: SourceWatcher | None = None
        if config.watch_enabled and config.program_path is not None:
            self.watcher = SourceWatcher(
                config.program_path,
                on_change=lambda text: self.enqueue({"cmd": "load_source", "text": text, "origin": "watch"}),
                initial_text=program_text,
                on_diagnostic=self._diag,
            )
            self.watcher.start()

        self.server: SnapshotServer | None = None
        if config.serve_port is not None:
            self.server = SnapshotServer(self, config.serve_port)

    # -- stepping ------------------------------------------------------------

    def step(self, n: int = 1) -> None:
        """Advance n session ticks (command drain, interpreter, driver)."""
        for _ in range(n):
            if self._stop:
                break
            with self._lock:
                self.tick_index += 1
                for cmd in self._script.pop(self.tick_index, []):
                    self._execute(cmd)
                self._drain_locked()
                report = self.interpreter.tick()
                self.driver.sim_tick()
                robot = self.driver.robot
                self.trace.emit(self.tick_index, "pose", {
                    "x": robot.x, "y": robot.y, "theta": robot.theta, "collided": robot.collided,
                })
                if robot.collided:
                    self.collided = True
                transitioned = bool(report.transitions_taken)
            if transitioned:
                self._transitioned = True
            self._maybe_push()

    def run(self) -> int:
        """Tick until the budget or an interrupt; 0 clean, 2 if collided."""
        try:
            if self.config.mode == VIRTUAL:
                assert self.config.max_ticks is not None
                while self.tick_index < self.config.max_ticks and not self._stop:
                    self.step()
            else:
                tick_s = self.config.tick_ms / 1000.0
                while not self._stop:
                    if self.config.max_ticks is not None and self.tick_index >= self.config.max_ticks:
                        break
                    started = time.monotonic()
                    with self._lock:
                        self._drain_locked()
                        paused = self.paused
                    if not paused:
                        self.step()
                    else:
                        self._maybe_push()
                    remaining = tick_s - (time.monotonic() - started)
                    if remaining > 0:
                        time.sleep(remaining)
        except KeyboardInterrupt:
            logger.info("interrupted; shutting down")
        finally:
            self.close()
        return 2 if self.collided else 0

    def close(self) -> None:
        if self.watcher is not None:
            self.watcher.stop()
        if self.server is not None:
            self.server.close()
        self.trace.close()

    # -- commands ------------------------------------------------------------

    def enqueue(self, cmd: dict, reply: Callable[[dict], None] | None = None) -> None:
        """Queue a command for execution at the next tick boundary."""
        self._queue.put((cmd, reply))

    def execute_command(self, cmd: dict) -> dict:
        """Run a command immediately (used by tests and the tick thread)."""
        with self._lock:
            return self._execute(cmd)

    def _drain_locked(self) -> None:
        while True:
            try:
                cmd, reply = self._queue.get_nowait()
            except queue.Empty:
                return
            result = self._execute(cmd)
            if reply is not None:
                try:
                    reply(result)
                except Exception:
                    logger.exception("command reply failed")

    def _execute(self, cmd: dict) -> dict:
        kind = cmd.get("cmd")
        if kind == "load_source":
            return self._load_source(cmd)
        if kind == "pause":
            if self.config.mode == VIRTUAL:
                return {"ok": True, "note": "pause has no effect in virtual mode"}
            self.paused = True
            return {"ok": True}
        if kind == "resume":
            self.paused = False
            return {"ok": True}
        if kind == "reset_world":
            self.driver.reset_world()
            return {"ok": True}
        if kind == "stop":
            self._stop = True
            return {"ok": True}
        if kind == "snapshot":
            return {"ok": True, "snapshot": self._snapshot_locked()}
        return {"ok": False, "error": f"unknown command {kind!r}"}

    def _load_source(self, cmd: dict) -> dict:
        text = cmd.get("text")
        if text is None:
            path = cmd.get("path")
            if path is None:
                return {"ok": False, "error": "load_source needs text or path"}
            try:
                with open(path, encoding="utf-8") as fh:
                    text = fh.read()
            except OSError as exc:
                self._diag(Diagnostic(message=f"cannot read source: {exc}", source="update"))
                return {"ok": False, "error": str(exc)}
        outcome = apply_source(self.interpreter, text)
        if outcome.kind != REJECTED_PARSE_ERROR:
            self.current_source = text
        payload = outcome.to_payload()
        payload["origin"] = cmd.get("origin", "command")
        self.trace.emit(self.tick_index, "update", payload)
        for diag in outcome.diagnostics:
            self._recent_diags.append({"tick": self.tick_index, **diag.to_payload()})
        result = dict(payload)
        result["ok"] = outcome.kind != REJECTED_PARSE_ERROR
        return result

    # -- observation -----------------------------------------------------------

    def snapshot(self) -> dict:
        with self._lock:
            return self._snapshot_locked()

    def _snapshot_locked(self) -> dict:
        active = [
            {"machine": path, "state": state, "variables": _jsonable_vars(bindings)}
            for (path, state, bindings) in self.interpreter.active_configuration()
        ]
        robot = self.driver.robot
        scan = self.driver.last_scan
        decimated = None
        if scan is not None:
            decimated = {
                "angle_min": scan.angle_min,
                "angle_increment": scan.angle_increment * SCAN_DECIMATION,
                "range_max": scan.range_max,
                "ranges": list(scan.ranges[::SCAN_DECIMATION]),
            }
        return {
            "tick": self.tick_index,
            "paused": self.paused,
            "mode": self.config.mode,
            "active": active,
            "pose": {"x": robot.x, "y": robot.y, "theta": robot.theta, "collided": robot.collided},
            "scan": decimated,
            "world": {"segments": [list(s) for s in self.world.segments]},
            "nodes": self.bus.graph(),
            "diagnostics": list(self._recent_diags),
            "source": self.current_source,
        }

    # -- event plumbing ----------------------------------------------------------

    def _on_bus_event(self, kind: str, payload: dict) -> None:
        self.trace.emit(self.tick_index, kind, payload)

    def _on_transition(self, machine_path: str, trans, from_state: str, tick: int) -> None:
        self.trace.emit(self.tick_index, "transition", {
            "machine": machine_path,
            "transition": trans.name,
            "from": from_state,
            "to": trans.target,
        })

    def _diag(self, diag: Diagnostic) -> None:
        payload = diag.to_payload()
        self._recent_diags.append({"tick": self.tick_index, **payload})
        self.trace.emit(self.tick_index, "diagnostic", payload)

    def _maybe_push(self) -> None:
        if self.server is None:
            return
        now = time.monotonic()
        if self._transitioned or now - self._last_push >= SNAPSHOT_PERIOD_S:
            self._transitioned = False
            self._last_push = now
            self.server.broadcast("snapshot", self.snapshot())

    # -- scripts --------------------------------------------------------------

    @staticmethod
    def _load_script(path: str) -> dict[int, list[dict]]:
        """Script file: JSON array of {"tick": N, "cmd": ..., ...} entries."""
        try:
            with open(path, encoding="utf-8") as fh:
                entries = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise SessionSetupError(f"cannot load script {path}: {exc}") from exc
        if not isinstance(entries, list):
            raise SessionSetupError(f"script {path} must be a JSON array")
        script: dict[int, list[dict]] = {}
        for entry in entries:
            if not isinstance(entry, dict) or "tick" not in entry or "cmd" not in entry:
                raise SessionSetupError(f"script entries need tick and cmd fields: {entry!r}")
            cmd = {k: v for k, v in entry.items() if k != "tick"}
            cmd.setdefault("origin", "script")
            script.setdefault(int(entry["tick"]), []).append(cmd)
        return script


def run_session(config: SessionConfig) -> int:
    session = Session(config)
    if session.server is not None:
        print(f"lrp: serving on 127.0.0.1:{session.server.port}", flush=True)
    return session.run()


def _jsonable_vars(bindings: dict) -> dict:
    out = {}
    for name, value in bindings.items():
        if value is None or isinstance(value, (bool, int, float, str)):
            out[name] = value
        else:
            out[name] = f"<{type(value).__name__}>"
    return out


# ---------------------------------------------------------------------------
# Snapshot/command server


class SnapshotServer:
    """Serves the duplex snapshot/command connection on localhost."""

    def __init__(self, session: Session, port: int):
        self._session = session
        self._listener = socket.create_server(("127.0.0.1", port))
        self.port = self._listener.getsockname()[1]
        self._clients: list[socket.socket] = []
        self._lock = threading.Lock()
        self._closed = False
        threading.Thread(target=self._accept_loop, name="lrp-server-accept", daemon=True).start()

    def _accept_loop(self) -> None:
        while not self._closed:
            try:
                conn, _ = self._listener.accept()
            except OSError:
                return
            with self._lock:
                self._clients.append(conn)
            try:
                conn.sendall(encode_frame("hello", {"version": 1, "tick_ms": self._session.config.tick_ms}))
                conn.sendall(encode_frame("snapshot", self._session.snapshot()))
            except OSError:
                self._drop(conn)
                continue
            threading.Thread(target=self._reader, args=(conn,), name="lrp-server-reader", daemon=True).start()

    def _reader(self, conn: socket.socket) -> None:
        try:
            while True:
                frame = read_frame(conn)
                if frame is None:
                    break
                if frame.get("type") != "command":
                    self._send(conn, "error", {"message": f"unexpected frame type {frame.get('type')!r}"})
                    continue
                payload = frame.get("payload") or {}
                if not isinstance(payload, dict):
                    self._send(conn, "error", {"message": "command payload must be an object"})
                    continue
                self._session.enqueue(payload, reply=self._replier(conn, payload))
        except (OSError, ValueError, json.JSONDecodeError):
            pass
        finally:
            self._drop(conn)

    def _replier(self, conn: socket.socket, command: dict) -> Callable[[dict], None]:
        frame_type = "outcome" if command.get("cmd") == "load_source" else "ack"

        def reply(result: dict) -> None:
            body = dict(result)
            if "id" in command:
                body["id"] = command["id"]
            self._send(conn, "error" if body.get("ok") is False else frame_type, body)

        return reply

    def broadcast(self, frame_type: str, payload: dict) -> None:
        data = encode_frame(frame_type, payload)
        with self._lock:
            clients = list(self._clients)
        for conn in clients:
            try:
                conn.sendall(data)
            except OSError:
                self._drop(conn)

    def _send(self, conn: socket.socket, frame_type: str, payload: dict) -> None:
        try:
            conn.sendall(encode_frame(frame_type, payload))
        except OSError:
            self._drop(conn)

    def _drop(self, conn: socket.socket) -> None:
        with self._lock:
            if conn in self._clients:
                self._clients.remove(conn)
        try:
            conn.close()
        except OSError:
            pass

    def close(self) -> None:
        self._closed = True
        try:
            self._listener.close()
        except OSError:
            pass
        with self._lock:
            clients = list(self._clients)
            self._clients.clear()
        for conn in clients:
            try:
                conn.close()
            except OSError:
                pass
