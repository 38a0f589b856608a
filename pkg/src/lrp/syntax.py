"""Syntax tree for the nested-state-machine language.

A program is a flat sequence of top-level forms: variable declarations,
machine declarations and spawn directives. Machines hold their own
variables, states, transitions and events; a state may embed a single
nested machine together with the spawn directive that starts it.

All nodes are frozen dataclasses: parsing yields immutable values that
are safe to share between the interpreter thread and anything taking
snapshots. Source positions never participate in equality, so two
parses of equivalent text compare equal.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .actions import Expr
from .diagnostics import Diagnostic

__all__ = [
    "ActionBlock",
    "VariableDecl",
    "EventDecl",
    "TransitionDecl",
    "SpawnDirective",
    "StateDecl",
    "MachineDecl",
    "ProgramAST",
    "print_program",
    "validate",
]

EVENT = "event"
TIMEOUT = "timeout"
EPSILON = "epsilon"


@dataclass(frozen=True)
class ActionBlock:
    """A bracketed snippet: verbatim interior text plus its parsed expression."""

    source_text: str
    expr: Expr
    line: int = field(default=0, compare=False)
    col: int = field(default=0, compare=False)


@dataclass(frozen=True)
class VariableDecl:
    name: str
    init: ActionBlock


@dataclass(frozen=True)
class EventDecl:
    name: str
    guard: ActionBlock


@dataclass(frozen=True)
class TransitionDecl:
    kind: str  # EVENT | TIMEOUT | EPSILON
    trigger: object  # event name (EVENT) | duration ms (TIMEOUT) | None (EPSILON)
    source: str
    target: str
    name: str
    action: ActionBlock | None = None


@dataclass(frozen=True)
class SpawnDirective:
    machine: str
    state: str


@dataclass(frozen=True)
class StateDecl:
    name: str
    onentry: ActionBlock | None = None
    running: ActionBlock | None = None
    onexit: ActionBlock | None = None
    nested: "MachineDecl | None" = None
    nested_spawn: SpawnDirective | None = None


@dataclass(frozen=True)
class MachineDecl:
    name: str
    variables: tuple[VariableDecl, ...] = ()
    states: tuple[StateDecl, ...] = ()
    transitions: tuple[TransitionDecl, ...] = ()
    events: tuple[EventDecl, ...] = ()

    def state(self, name: str) -> StateDecl | None:
        for st in self.states:
            if st.name == name:
                return st
        return None

    def event(self, name: str) -> EventDecl | None:
        for ev in self.events:
            if ev.name == name:
                return ev
        return None


@dataclass(frozen=True)
class ProgramAST:
    variables: tuple[VariableDecl, ...] = ()
    machines: tuple[MachineDecl, ...] = ()
    spawns: tuple[SpawnDirective, ...] = ()
    source_hash: str = field(default="", compare=False)
    diagnostics: tuple[Diagnostic, ...] = field(default=(), compare=False)

    def machine(self, name: str) -> MachineDecl | None:
        for m in self.machines:
            if m.name == name:
                return m
        return None


# ---------------------------------------------------------------------------
# Printer


def print_program(ast: ProgramAST) -> str:
    """Render a program back to source text.

    Action blocks are emitted verbatim from their stored interior text,
    so parse -> print -> parse is a fixpoint.
    """
    lines: list[str] = []
    for v in ast.variables:
        lines.append(_var_text(v))
    for m in ast.machines:
        lines.extend(_machine_lines(m, 0))
    for sp in ast.spawns:
        lines.append(f"(spawn {sp.machine} {sp.state})")
    return "\n".join(lines) + ("\n" if lines else "")


def _var_text(v: VariableDecl) -> str:
    return f"(var {v.name} := [{v.init.source_text}])"


def _machine_lines(m: MachineDecl, depth: int) -> list[str]:
    pad = "  " * depth
    inner = "  " * (depth + 1)
    lines = [f"{pad}(machine {m.name}"]
    for v in m.variables:
        lines.append(inner + _var_text(v))
    for st in m.states:
        lines.extend(_state_lines(st, depth + 1))
    for t in m.transitions:
        lines.append(inner + _transition_text(t))
    for ev in m.events:
        lines.append(f"{inner}(event {ev.name} [{ev.guard.source_text}])")
    lines[-1] += ")"
    return lines


def _state_lines(st: StateDecl, depth: int) -> list[str]:
    pad = "  " * depth
    inner = "  " * (depth + 1)
    lines = [f"{pad}(state {st.name}"]
    if st.onentry is not None:
        lines.append(f"{inner}(onentry [{st.onentry.source_text}])")
    if st.running is not None:
        lines.append(f"{inner}(running [{st.running.source_text}])")
    if st.onexit is not None:
        lines.append(f"{inner}(onexit [{st.onexit.source_text}])")
    if st.nested is not None:
        lines.extend(_machine_lines(st.nested, depth + 1))
    if st.nested_spawn is not None:
        lines.append(f"{inner}(spawn {st.nested_spawn.machine} {st.nested_spawn.state})")
    if len(lines) == 1:
        lines[0] += ")"
    else:
        lines[-1] += ")"
    return lines


def _transition_text(t: TransitionDecl) -> str:
    if t.kind == EVENT:
        head = f"(on {t.trigger} "
    elif t.kind == TIMEOUT:
        head = f"(ontime {t.trigger} "
    else:
        head = "(eps "
    text = f"{head}{t.source} -> {t.target} {t.name}"
    if t.action is not None:
        text += f" [{t.action.source_text}]"
    return text + ")"


# ---------------------------------------------------------------------------
# Validation


def validate(ast: ProgramAST) -> list[Diagnostic]:
    """Name-resolution and uniqueness checks.

    Returns every problem found; an empty list means fully resolved.
    Validation never fails: a program with diagnostics is still
    loadable, the interpreter just treats unresolved pieces as inert.
    """
    diags: list[Diagnostic] = []
    _check_unique((v.name for v in ast.variables), "variable", "root scope", diags)
    _check_unique((m.name for m in ast.machines), "machine", "top level", diags)
    for m in ast.machines:
        _validate_machine(m, frozenset(), m.name, diags)
    for sp in ast.spawns:
        machine = ast.machine(sp.machine)
        if machine is None:
            diags.append(_d(f"unknown machine {sp.machine}", where=f"spawn {sp.machine}"))
        elif machine.state(sp.state) is None:
            diags.append(_d(f"unknown state {sp.state}", where=f"spawn {sp.machine}"))
    return diags


def _validate_machine(m: MachineDecl, enclosing_events: frozenset[str], path: str, diags: list[Diagnostic]) -> None:
    _check_unique((v.name for v in m.variables), "variable", path, diags)
    _check_unique((s.name for s in m.states), "state", path, diags)
    _check_unique((t.name for t in m.transitions), "transition", path, diags)
    _check_unique((e.name for e in m.events), "event", path, diags)

    state_names = {s.name for s in m.states}
    event_names = {e.name for e in m.events} | enclosing_events
    for t in m.transitions:
        where = f"{path}/{t.name}"
        if t.source not in state_names:
            diags.append(_d(f"unknown source state {t.source}", where=where))
        if t.target not in state_names:
            diags.append(_d(f"unknown target state {t.target}", where=where))
        if t.kind == EVENT and t.trigger not in event_names:
            diags.append(_d(f"unknown event {t.trigger}", where=where))
        if t.kind == TIMEOUT and not (isinstance(t.trigger, int) and t.trigger > 0):
            diags.append(_d(f"timeout duration must be positive, got {t.trigger}", where=where))

    for st in m.states:
        where = f"{path}/{st.name}"
        if st.nested is not None:
            _validate_machine(st.nested, event_names, f"{where}/{st.nested.name}", diags)
            if st.nested_spawn is None:
                diags.append(
                    _d(
                        f"nested machine {st.nested.name} has no spawn directive and will never run",
                        where=where,
                        severity="warning",
                    )
                )
        if st.nested_spawn is not None:
            sp = st.nested_spawn
            if st.nested is None or st.nested.name != sp.machine:
                diags.append(_d(f"unknown machine {sp.machine}", where=where))
            elif st.nested.state(sp.state) is None:
                diags.append(_d(f"unknown state {sp.state}", where=f"{where}/{sp.machine}"))


def _check_unique(names, kind: str, scope: str, diags: list[Diagnostic]) -> None:
    seen: set[str] = set()
    for name in names:
        if name in seen:
            diags.append(_d(f"duplicate {kind} name {name} in {scope}", where=scope))
        seen.add(name)


def _d(message: str, where: str | None = None, severity: str = "error") -> Diagnostic:
    return Diagnostic(message=message, severity=severity, source="validate", where=where)
