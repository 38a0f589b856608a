"""Integrating edited source into a running interpreter.

`apply_source` swaps declarations under running machines without
restarting them. The rules, in order:

* source that fails to parse is rejected outright - the running program
  stays byte-identical;
* a machine whose full active state path survives in the new program
  keeps its state and its entry tick (timers keep counting);
* a machine whose active state vanished respawns at its spawn
  directive's state;
* if that spawn target is gone too, the machine idles with a diagnostic.

Variable bindings follow their init text: a declaration whose init
block text is unchanged keeps the current value; changed or new init
text (re)runs the block; dropped declarations are removed. State
identity is the full path of names, so a rename reads as delete+add and
causes a respawn.

`SourceWatcher` feeds the same path from disk: it polls the watched
file, debounces bursts of writes, and skips content whose digest
matches what is already running.
"""

from __future__ import annotations

import hashlib
import threading
import time
from dataclasses import dataclass, field
from typing import Callable

from .diagnostics import Diagnostic
from .errors import ParseError
from .interpreter import IDLE_ERROR, RUNNING, Interpreter, MachineInstance
from .parser import parse_program
from .syntax import MachineDecl, ProgramAST, SpawnDirective

__all__ = ["UpdateOutcome", "apply_source", "SourceWatcher", "INTEGRATED",
           "INTEGRATED_WITH_RESPAWN", "REJECTED_PARSE_ERROR", "MACHINE_IDLED"]

INTEGRATED = "integrated"
INTEGRATED_WITH_RESPAWN = "integrated_with_respawn"
REJECTED_PARSE_ERROR = "rejected_parse_error"
MACHINE_IDLED = "machine_idled"


@dataclass
class UpdateOutcome:
    kind: str
    preserved_states: list[str] = field(default_factory=list)  # full active paths kept
    respawned: list[str] = field(default_factory=list)  # machine paths restarted at their spawn state
    idled: list[str] = field(default_factory=list)
    spawned: list[str] = field(default_factory=list)  # machines newly started by this edit
    diagnostics: list[Diagnostic] = field(default_factory=list)

    def to_payload(self) -> dict:
        return {
            "kind": self.kind,
            "preserved": list(self.preserved_states),
            "respawned": list(self.respawned),
            "idled": list(self.idled),
            "spawned": list(self.spawned),
            "diagnostics": [d.to_payload() for d in self.diagnostics],
        }


def apply_source(interp: Interpreter, new_source: str) -> UpdateOutcome:
    """Parse new source and integrate it into the running interpreter."""
    try:
        new_program = parse_program(new_source)
    except ParseError as exc:
        return UpdateOutcome(
            kind=REJECTED_PARSE_ERROR,
            diagnostics=[Diagnostic(message=exc.message, source="parse", line=exc.line, col=exc.col)],
        )

    outcome = UpdateOutcome(kind=INTEGRATED, diagnostics=list(new_program.diagnostics))
    old_program = interp.program
    interp.program = new_program
    _integrate_vars(interp, interp.root_env, old_program.variables, new_program.variables, where="root")

    for inst in interp.instances:
        _integrate_top_instance(interp, inst, new_program, outcome)

    # spawn directives for machines with no instance yet start new ones
    running_names = {inst.path[0] for inst in interp.instances}
    for sp in new_program.spawns:
        if sp.machine not in running_names:
            running_names.add(sp.machine)
            spawned = interp.spawn(sp.machine, sp.state)
            if spawned.status == RUNNING:
                outcome.spawned.append(sp.machine)

    if outcome.idled:
        outcome.kind = MACHINE_IDLED
    elif outcome.respawned:
        outcome.kind = INTEGRATED_WITH_RESPAWN
    return outcome


def _integrate_top_instance(interp: Interpreter, inst: MachineInstance,
                            program: ProgramAST, outcome: UpdateOutcome) -> None:
    name = inst.path[0]
    decl = program.machine(name)
    directive = next((sp for sp in program.spawns if sp.machine == name), None)
    if decl is None:
        if inst.status == RUNNING:
            inst.status = IDLE_ERROR
            inst.active_state = None
            inst.nested = None
            outcome.idled.append(name)
            outcome.diagnostics.append(Diagnostic(
                message=f"machine {name} is no longer declared; instance idled",
                source="update", where=name,
            ))
        return
    if inst.status != RUNNING:
        # an edit can revive a previously idled machine
        if directive is not None and decl.state(directive.state) is not None:
            inst.decl = decl
            _respawn(interp, inst, directive.state, outcome)
        return
    _integrate_running(interp, inst, decl, directive, outcome)


def _integrate_running(interp: Interpreter, inst: MachineInstance, new_decl: MachineDecl,
                       directive: SpawnDirective | None, outcome: UpdateOutcome) -> None:
    old_decl = inst.decl
    inst.decl = new_decl
    _integrate_vars(
        interp,
        inst.env,
        old_decl.variables if old_decl is not None else (),
        new_decl.variables,
        where=inst.path_str,
    )
    active = inst.active_state
    if active is not None and new_decl.state(active) is not None:
        outcome.preserved_states.append(f"{inst.path_str}/{active}")
        _reconcile_nested(interp, inst, new_decl.state(active), outcome)
        return
    # active state vanished: fall back to the spawn directive
    if directive is None or new_decl.state(directive.state) is None:
        inst.status = IDLE_ERROR
        inst.active_state = None
        inst.nested = None
        outcome.idled.append(inst.path_str)
        outcome.diagnostics.append(Diagnostic(
            message=f"machine {inst.path_str} lost its active state and has no usable spawn target; idled",
            source="update", where=inst.path_str,
        ))
        return
    _respawn(interp, inst, directive.state, outcome)


def _respawn(interp: Interpreter, inst: MachineInstance, state_name: str, outcome: UpdateOutcome) -> None:
    # control position resets; variable bindings were already reconciled
    inst.nested = None
    inst.status = RUNNING
    inst.active_state = state_name
    inst.entered_at_tick = interp.tick_count
    inst.pending_entry = True
    outcome.respawned.append(f"{inst.path_str}/{state_name}")


def _reconcile_nested(interp: Interpreter, inst: MachineInstance, new_state, outcome: UpdateOutcome) -> None:
    child = inst.nested
    if child is not None:
        if new_state.nested is not None and new_state.nested.name == child.path[-1]:
            _integrate_running(interp, child, new_state.nested, new_state.nested_spawn, outcome)
            return
        # the nested machine under the active state changed identity or
        # disappeared; the old instance's code is gone, so no onexits run
        inst.nested = None
    if new_state.nested is not None and new_state.nested_spawn is not None \
            and new_state.nested_spawn.machine == new_state.nested.name:
        fresh = MachineInstance(
            new_state.nested,
            inst.path + (new_state.name, new_state.nested.name),
            inst.env.child(),
            parent=inst,
        )
        inst.nested = fresh
        interp._arm_fresh(fresh, new_state.nested_spawn.state)
        if fresh.status == RUNNING:
            outcome.spawned.append(fresh.path_str)


def _integrate_vars(interp: Interpreter, env, old_vars, new_vars, where: str) -> None:
    old_by_name = {v.name: v for v in old_vars}
    new_names = set()
    for v in new_vars:
        new_names.add(v.name)
        old = old_by_name.get(v.name)
        if old is not None and old.init.source_text == v.init.source_text and env.has_own(v.name):
            continue  # unchanged init text keeps the current value
        interp.init_variable(env, v, where=where)
    for name in old_by_name:
        if name not in new_names:
            env.remove(name)


# ---------------------------------------------------------------------------
# File watching


class SourceWatcher:
    """Polls a file and reports settled content changes.

    A change fires only after the content has stayed stable for the
    debounce window, so editor write bursts collapse into one update.
    Content whose digest matches the last applied text is skipped.
    """

    def __init__(
        self,
        path: str,
        on_change: Callable[[str], None],
        initial_text: str | None = None,
        poll_ms: int = 25,
        debounce_ms: int = 100,
        on_diagnostic: Callable[[Diagnostic], None] | None = None,
    ):
        self.path = path
        self._on_change = on_change
        self._poll_s = poll_ms / 1000.0
        self._debounce_s = debounce_ms / 1000.0
        self._on_diagnostic = on_diagnostic
        self._applied_digest = _digest(initial_text) if initial_text is not None else None
        self._stop = threading.Event()
        self._thread: threading.Thread | None = None
        self._read_failed = False

    def start(self) -> None:
        if self._thread is not None:
            return
        self._thread = threading.Thread(target=self._run, name=f"watch:{self.path}", daemon=True)
        self._thread.start()

    def stop(self) -> None:
        self._stop.set()
        if self._thread is not None:
            self._thread.join(timeout=2.0)
            self._thread = None

    def _run(self) -> None:
        pending_digest: str | None = None
        pending_text = ""
        pending_since = 0.0
        while not self._stop.wait(self._poll_s):
            try:
                with open(self.path, encoding="utf-8") as fh:
                    text = fh.read()
                self._read_failed = False
            except OSError as exc:
                if not self._read_failed:
                    self._read_failed = True
                    if self._on_diagnostic is not None:
                        self._on_diagnostic(Diagnostic(
                            message=f"watched file unreadable: {exc}",
                            severity="warning", source="update", where=self.path,
                        ))
                continue
            digest = _digest(text)
            now = time.monotonic()
            if digest == self._applied_digest:
                pending_digest = None
                continue
            if digest != pending_digest:
                pending_digest = digest
                pending_text = text
                pending_since = now
                continue
            if now - pending_since >= self._debounce_s:
                self._applied_digest = digest
                pending_digest = None
                self._on_change(pending_text)


def _digest(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()
