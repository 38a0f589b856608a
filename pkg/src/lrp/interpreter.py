"""Tick-driven execution of machine programs.

Machines are always running: guard failures count as false, action
failures skip only the failing block, and unknown names idle a single
machine rather than stopping the session. Every problem surfaces as a
:class:`Diagnostic` on the tick report.

One tick, outermost machine first:

1. collect the active state's outgoing transitions in declaration order;
2. eligibility - epsilon: always; timeout: elapsed ticks times the tick
   period reached the duration; event: the guard evaluates to true;
3. take the first eligible transition: nested machines are torn down
   deepest-first (running their onexits), then source onexit, transition
   action and target onentry run, each exactly once; epsilon transitions
   may chain within the tick up to :data:`EPS_CHAIN_CAP`;
4. with nothing eligible, the active state's `running` block executes
   and the tick recurses into the nested machine, so outer transitions
   preempt inner ones.

A nested machine spawns when its enclosing state is entered and is torn
down when that state exits; re-entering re-spawns it fresh.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

from .actions import Environment, eval_expr
from .diagnostics import Diagnostic
from .errors import EvalError
from .syntax import EPSILON, TIMEOUT, EventDecl, MachineDecl, ProgramAST, TransitionDecl

__all__ = ["Interpreter", "MachineInstance", "TickReport", "EPS_CHAIN_CAP", "DEFAULT_TICK_MS"]

EPS_CHAIN_CAP = 100
DEFAULT_TICK_MS = 50

RUNNING = "running"
IDLE_ERROR = "idle_error"


@dataclass
class TickReport:
    tick: int
    transitions_taken: list[tuple[str, str]] = field(default_factory=list)  # (machine path, transition name)
    diagnostics: list[Diagnostic] = field(default_factory=list)
    eps_chain_truncated: bool = False


class MachineInstance:
    """Runtime state of one spawned machine."""

    __slots__ = ("decl", "path", "env", "parent", "active_state", "entered_at_tick", "pending_entry", "nested", "status")

    def __init__(self, decl: MachineDecl | None, path: tuple[str, ...], env: Environment,
                 parent: "MachineInstance | None" = None):
        self.decl = decl
        self.path = path  # alternating machine/state names, ending with this machine's name
        self.env = env
        self.parent = parent
        self.active_state: str | None = None
        self.entered_at_tick = 0
        self.pending_entry = False
        self.nested: MachineInstance | None = None
        self.status = RUNNING

    @property
    def path_str(self) -> str:
        return "/".join(self.path)

    def active_path(self) -> tuple[str, ...] | None:
        if self.active_state is None:
            return None
        return self.path + (self.active_state,)


class Interpreter:
    """Executes a program's machines against a shared root environment."""

    def __init__(
        self,
        program: ProgramAST,
        host_registry: dict | None = None,
        tick_ms: int = DEFAULT_TICK_MS,
        on_diagnostic: Callable[[Diagnostic], None] | None = None,
        on_transition: Callable[[str, TransitionDecl, str, int], None] | None = None,
    ):
        self.program = program
        self.tick_ms = tick_ms
        self.tick_count = 0
        self.root_env = Environment(host_registry=host_registry)
        self.instances: list[MachineInstance] = []
        self._root_vars_done = False
        self._on_diagnostic = on_diagnostic
        self._on_transition = on_transition
        self._report: TickReport | None = None
        self._guard_diags_this_tick: set[tuple[str, str]] = set()

    # -- lifecycle ----------------------------------------------------------

    def start(self) -> None:
        """Evaluate root variables, then execute every spawn directive."""
        self._ensure_root_vars()
        for sp in self.program.spawns:
            self.spawn(sp.machine, sp.state)

    def spawn(self, machine_name: str, state_name: str) -> MachineInstance:
        """Create an instance of a declared machine armed at an initial state.

        Unknown machine or state names produce an idle instance plus a
        diagnostic; the rest of the program keeps running.
        """
        self._ensure_root_vars()
        decl = self.program.machine(machine_name)
        inst = MachineInstance(decl, (machine_name,), self.root_env.child())
        self.instances.append(inst)
        if decl is None:
            inst.status = IDLE_ERROR
            self._diag(f"cannot spawn unknown machine {machine_name}", source="spawn", where=machine_name)
            return inst
        self._arm_fresh(inst, state_name)
        return inst

    def _ensure_root_vars(self) -> None:
        if self._root_vars_done:
            return
        self._root_vars_done = True
        for v in self.program.variables:
            self.init_variable(self.root_env, v, where="root")

    def init_variable(self, env: Environment, decl, where: str) -> None:
        """Run one init block; a failing init binds nil and diagnoses."""
        try:
            value = eval_expr(decl.init.expr, env)
        except EvalError as exc:
            value = None
            self._diag(f"initialization of '{decl.name}' failed: {exc}", source="init", where=where)
        env.define(decl.name, value)

    def _arm_fresh(self, inst: MachineInstance, state_name: str) -> None:
        # spawn semantics: machine variables now, onentry on the next tick
        assert inst.decl is not None
        for v in inst.decl.variables:
            self.init_variable(inst.env, v, where=inst.path_str)
        if inst.decl.state(state_name) is None:
            inst.status = IDLE_ERROR
            inst.active_state = None
            self._diag(
                f"cannot spawn {inst.path_str} at unknown state {state_name}",
                source="spawn",
                where=inst.path_str,
            )
            return
        inst.active_state = state_name
        inst.entered_at_tick = self.tick_count
        inst.pending_entry = True

    # -- ticking ------------------------------------------------------------

    def tick(self) -> TickReport:
        self.tick_count += 1
        report = TickReport(tick=self.tick_count)
        self._report = report
        self._guard_diags_this_tick.clear()
        for inst in self.instances:
            self._tick_instance(inst, report)
        self._report = None
        return report

    def _tick_instance(self, inst: MachineInstance, report: TickReport) -> None:
        if inst.status != RUNNING or inst.decl is None or inst.active_state is None:
            return
        if inst.pending_entry:
            inst.pending_entry = False
            self._run_entry(inst, report)
        eps_taken = 0
        took_any = False
        while True:
            trans = self._first_eligible(inst, epsilon_only=took_any, report=report)
            if trans is None:
                break
            if trans.kind == EPSILON and eps_taken >= EPS_CHAIN_CAP:
                report.eps_chain_truncated = True
                self._diag(
                    f"epsilon chain truncated after {EPS_CHAIN_CAP} transitions in one tick",
                    severity="warning",
                    source="interpreter",
                    where=inst.path_str,
                    report=report,
                )
                break
            self._take(inst, trans, report)
            took_any = True
            if trans.kind == EPSILON:
                eps_taken += 1
        if not took_any:
            state = inst.decl.state(inst.active_state)
            if state is not None and state.running is not None:
                self._run_block(inst, state.running, source="action",
                                where=f"{inst.path_str}/{state.name}/running", report=report)
            if inst.nested is not None:
                self._tick_instance(inst.nested, report)

    def _first_eligible(self, inst: MachineInstance, epsilon_only: bool, report: TickReport) -> TransitionDecl | None:
        assert inst.decl is not None
        active = inst.active_state
        for t in inst.decl.transitions:
            if t.source != active:
                continue
            if epsilon_only and t.kind != EPSILON:
                continue
            if inst.decl.state(t.target) is None:
                self._diag_once(
                    inst,
                    f"transition-{t.name}",
                    f"transition {t.name} targets unknown state {t.target}",
                    report,
                    source="interpreter",
                )
                continue
            if t.kind == EPSILON:
                return t
            if t.kind == TIMEOUT:
                if (self.tick_count - inst.entered_at_tick) * self.tick_ms >= t.trigger:
                    return t
                continue
            if self._guard_true(inst, t, report):
                return t
        return None

    def _guard_true(self, inst: MachineInstance, t: TransitionDecl, report: TickReport) -> bool:
        owner, event = self._resolve_event(inst, t.trigger)
        if event is None:
            self._diag_once(inst, f"event-{t.trigger}", f"unknown event {t.trigger}", report)
            return False
        try:
            value = eval_expr(event.guard.expr, owner.env)
        except EvalError as exc:
            self._diag_once(inst, f"guard-{t.trigger}", f"guard {t.trigger} failed: {exc}", report)
            return False
        if value is True:
            return True
        if value is False:
            return False
        self._diag_once(
            inst,
            f"guard-{t.trigger}",
            f"guard {t.trigger} must evaluate to a boolean, got {type(value).__name__}",
            report,
        )
        return False

    def _resolve_event(self, inst: MachineInstance, name: object) -> tuple[MachineInstance, EventDecl | None]:
        # events resolve in the declaring machine or any enclosing one;
        # guards evaluate in the declaring machine's environment
        node: MachineInstance | None = inst
        while node is not None:
            if node.decl is not None:
                event = node.decl.event(str(name))
                if event is not None:
                    return node, event
            node = node.parent
        return inst, None

    def _take(self, inst: MachineInstance, trans: TransitionDecl, report: TickReport) -> None:
        assert inst.decl is not None
        source = inst.decl.state(inst.active_state) if inst.active_state else None
        self._teardown_nested(inst, report)
        if source is not None and source.onexit is not None:
            self._run_block(inst, source.onexit, source="action",
                            where=f"{inst.path_str}/{source.name}/onexit", report=report)
        if trans.action is not None:
            self._run_block(inst, trans.action, source="action",
                            where=f"{inst.path_str}/{trans.name}", report=report)
        from_state = source.name if source is not None else "?"
        inst.active_state = trans.target
        inst.entered_at_tick = self.tick_count
        report.transitions_taken.append((inst.path_str, trans.name))
        if self._on_transition is not None:
            self._on_transition(inst.path_str, trans, from_state, self.tick_count)
        self._run_entry(inst, report)

    def _run_entry(self, inst: MachineInstance, report: TickReport) -> None:
        assert inst.decl is not None and inst.active_state is not None
        state = inst.decl.state(inst.active_state)
        if state is None:
            return
        if state.onentry is not None:
            self._run_block(inst, state.onentry, source="action",
                            where=f"{inst.path_str}/{state.name}/onentry", report=report)
        if state.nested is not None and state.nested_spawn is not None:
            sp = state.nested_spawn
            if sp.machine == state.nested.name:
                child = MachineInstance(
                    state.nested,
                    inst.path + (state.name, state.nested.name),
                    inst.env.child(),
                    parent=inst,
                )
                inst.nested = child
                self._arm_fresh(child, sp.state)

    def _teardown_nested(self, inst: MachineInstance, report: TickReport) -> None:
        child = inst.nested
        if child is None:
            return
        self._teardown_nested(child, report)
        if child.status == RUNNING and child.decl is not None and child.active_state is not None \
                and not child.pending_entry:  # never-entered states have no exit to run
            state = child.decl.state(child.active_state)
            if state is not None and state.onexit is not None:
                self._run_block(child, state.onexit, source="action",
                                where=f"{child.path_str}/{state.name}/onexit", report=report)
        inst.nested = None

    def _run_block(self, inst: MachineInstance, block, source: str, where: str, report: TickReport | None) -> None:
        try:
            eval_expr(block.expr, inst.env)
        except EvalError as exc:
            self._diag(f"action failed: {exc}", source=source, where=where, report=report)

    # -- observation --------------------------------------------------------

    def active_configuration(self) -> list[tuple[str, str, dict]]:
        """Deepest-first (machine path, state, visible variables) entries."""
        entries: list[tuple[str, str, dict]] = []
        for inst in self.instances:
            entries.extend(self._configuration_of(inst))
        return entries

    def _configuration_of(self, inst: MachineInstance) -> list[tuple[str, str, dict]]:
        if inst.status != RUNNING or inst.active_state is None:
            return []
        entries: list[tuple[str, str, dict]] = []
        if inst.nested is not None:
            entries.extend(self._configuration_of(inst.nested))
        entries.append((inst.path_str, inst.active_state, inst.env.visible_bindings()))
        return entries

    # -- diagnostics --------------------------------------------------------

    def _diag_once(self, inst: MachineInstance, key: str, message: str, report: TickReport,
                   source: str = "guard") -> None:
        # one diagnostic per failing guard (or unresolvable transition) per tick
        dedup = (inst.path_str, key)
        if dedup in self._guard_diags_this_tick:
            return
        self._guard_diags_this_tick.add(dedup)
        self._diag(message, source=source, where=inst.path_str, report=report)

    def _diag(
        self,
        message: str,
        severity: str = "error",
        source: str = "interpreter",
        where: str | None = None,
        report: TickReport | None = None,
    ) -> None:
        diag = Diagnostic(message=message, severity=severity, source=source, where=where)
        target = report if report is not None else self._report
        if target is not None:
            target.diagnostics.append(diag)
        if self._on_diagnostic is not None:
            self._on_diagnostic(diag)
