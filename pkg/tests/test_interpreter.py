from lrp.interpreter import EPS_CHAIN_CAP, IDLE_ERROR, RUNNING, Interpreter
from lrp.parser import parse_program

from conftest import Probe


def make(text: str, hosts: dict | None = None, tick_ms: int = 50) -> Interpreter:
    diags = []
    interp = Interpreter(parse_program(text), host_registry=hosts or {}, tick_ms=tick_ms,
                         on_diagnostic=diags.append)
    interp.collected_diagnostics = diags
    return interp


class TestSpawn:
    def test_spawn_binds_variables_and_arms_initial_state(self, stop_program_text):
        bridge = Probe({"uniqueInstance": None})
        bridge.responses["uniqueInstance"] = bridge
        interp = make(stop_program_text, hosts={"RobulabBridge": bridge})
        interp.start()
        (inst,) = interp.instances
        assert inst.active_state == "forward"
        assert inst.status == RUNNING
        bindings = inst.env.visible_bindings()
        assert bindings["f_vel"] == 0.25
        assert bindings["t_vel"] == 0.5
        assert bindings["min_distance"] == 0.5
        assert bindings["robulab"] is bridge

    def test_initial_onentry_runs_on_first_tick_not_at_spawn(self):
        probe = Probe({"enter": None})
        interp = make("(machine M (state a (onentry [probe enter]))) (spawn M a)", hosts={"probe": probe})
        interp.start()
        assert probe.calls == []
        interp.tick()
        assert probe.selectors() == ["enter"]

    def test_spawn_unknown_state_idles_with_diagnostic(self):
        interp = make("(machine M (state a)) (spawn M nosuch)")
        interp.start()
        (inst,) = interp.instances
        assert inst.status == IDLE_ERROR
        assert any("unknown state nosuch" in d.message for d in interp.collected_diagnostics)
        # ticking an idled machine is a no-op
        report = interp.tick()
        assert report.transitions_taken == []

    def test_spawn_unknown_machine_idles_with_diagnostic(self):
        interp = make("(machine M (state a)) (spawn Ghost a)")
        interp.start()
        (inst,) = interp.instances
        assert inst.status == IDLE_ERROR
        assert any("unknown machine Ghost" in d.message for d in interp.collected_diagnostics)

    def test_failing_var_init_binds_nil_and_machine_still_enters(self):
        probe = Probe()  # raises for every selector
        interp = make(
            "(machine M (var broken := [probe boom]) (state a)) (spawn M a)",
            hosts={"probe": probe},
        )
        interp.start()
        (inst,) = interp.instances
        assert inst.status == RUNNING
        assert inst.active_state == "a"
        assert inst.env.visible_bindings()["broken"] is None
        assert any("initialization of 'broken' failed" in d.message for d in interp.collected_diagnostics)

    def test_root_vars_evaluated_in_declaration_order(self):
        order = []
        probe = Probe({"first": lambda: order.append("first"), "second": lambda: order.append("second")})
        interp = make(
            "(var a := [probe first]) (var b := [probe second]) (machine M (state s)) (spawn M s)",
            hosts={"probe": probe},
        )
        interp.start()
        assert order == ["first", "second"]


class TestTransitions:
    def test_event_transition_when_guard_flips(self):
        flag = {"value": False}
        probe = Probe({"sense": lambda: flag["value"], "stopnow": None, "go": None})
        text = """
        (machine M
          (state run (onentry [probe go]))
          (state halt (onentry [probe stopnow]))
          (on seen run -> halt t-halt)
          (event seen [probe sense]))
        (spawn M run)
        """
        interp = make(text, hosts={"probe": probe})
        interp.start()
        report = interp.tick()
        assert report.transitions_taken == []
        flag["value"] = True
        report = interp.tick()
        assert report.transitions_taken == [("M", "t-halt")]
        assert interp.instances[0].active_state == "halt"

    def test_exactly_once_exit_action_entry_ordering(self):
        probe = Probe({"out": None, "act": None, "into": None, "sense": True})
        text = """
        (machine M
          (state a (onexit [probe out]))
          (state b (onentry [probe into]))
          (on seen a -> b t-go [probe act])
          (event seen [probe sense]))
        (spawn M a)
        """
        interp = make(text, hosts={"probe": probe})
        interp.start()
        interp.tick()
        assert probe.selectors() == ["sense", "out", "act", "into"]

    def test_priority_is_declaration_order(self):
        probe = Probe({"one": True, "two": True})
        text = """
        (machine M
          (state a) (state b) (state c)
          (on first a -> b t-first)
          (on second a -> c t-second)
          (event first [probe one])
          (event second [probe two]))
        (spawn M a)
        """
        interp = make(text, hosts={"probe": probe})
        interp.start()
        report = interp.tick()
        assert report.transitions_taken == [("M", "t-first")]

    def test_timeout_fires_by_elapsed_ticks(self):
        text = "(machine M (state a) (state b) (ontime 500 a -> b t-go)) (spawn M a)"
        interp = make(text, tick_ms=50)
        interp.start()
        fired_at = None
        for _ in range(20):
            report = interp.tick()
            if report.transitions_taken:
                fired_at = report.tick
                break
        assert fired_at == 10

    def test_timeout_counts_from_state_entry(self):
        probe = Probe({"sense": False})
        text = """
        (machine M
          (state a) (state b) (state c)
          (on go a -> b t-start)
          (ontime 200 b -> c t-late)
          (event go [probe sense]))
        (spawn M a)
        """
        interp = make(text, hosts={"probe": probe}, tick_ms=50)
        interp.start()
        for _ in range(5):
            interp.tick()
        probe.responses["sense"] = True
        report = interp.tick()  # tick 6: a -> b
        assert report.transitions_taken == [("M", "t-start")]
        probe.responses["sense"] = False
        fired_at = None
        for _ in range(10):
            report = interp.tick()
            if report.transitions_taken:
                fired_at = report.tick
                break
        assert fired_at == 10  # entered at 6, 200ms/50ms = 4 ticks later

    def test_epsilon_chains_within_one_tick(self):
        text = """
        (machine M
          (state a) (state b) (state c)
          (eps a -> b t-ab)
          (eps b -> c t-bc))
        (spawn M a)
        """
        interp = make(text)
        interp.start()
        report = interp.tick()
        assert [name for _, name in report.transitions_taken] == ["t-ab", "t-bc"]
        assert not report.eps_chain_truncated

    def test_epsilon_self_loop_truncates_at_cap(self):
        interp = make("(machine M (state a) (eps a -> a t-loop)) (spawn M a)")
        interp.start()
        report = interp.tick()
        assert len(report.transitions_taken) == EPS_CHAIN_CAP
        assert report.eps_chain_truncated
        assert any("epsilon chain" in d.message for d in report.diagnostics)
        # the machine survives and keeps looping next tick
        report = interp.tick()
        assert len(report.transitions_taken) == EPS_CHAIN_CAP
        assert interp.instances[0].status == RUNNING

    def test_event_then_epsilon_chain_is_cap_plus_one(self):
        probe = Probe({"sense": True})
        text = """
        (machine M
          (state a) (state b)
          (on go a -> b t-go)
          (eps b -> b t-spin)
          (event go [probe sense]))
        (spawn M a)
        """
        interp = make(text, hosts={"probe": probe})
        interp.start()
        report = interp.tick()
        assert len(report.transitions_taken) == EPS_CHAIN_CAP + 1
        assert report.eps_chain_truncated

    def test_running_block_each_idle_tick_but_not_on_transition(self):
        probe = Probe({"step": None, "sense": False})
        text = """
        (machine M
          (state a (running [probe step]))
          (state b)
          (on go a -> b t-go)
          (event go [probe sense]))
        (spawn M a)
        """
        interp = make(text, hosts={"probe": probe})
        interp.start()
        interp.tick()
        interp.tick()
        assert probe.selectors().count("step") == 2
        probe.responses["sense"] = True
        interp.tick()  # transition tick: no running block
        assert probe.selectors().count("step") == 2


class TestErrorLiveness:
    def test_guard_error_counts_false_with_one_diagnostic_per_tick(self):
        text = """
        (machine M
          (state a) (state b)
          (on go a -> b t-go)
          (event go [missing_var]))
        (spawn M a)
        """
        interp = make(text)
        interp.start()
        for _ in range(1000):
            report = interp.tick()
            guard_diags = [d for d in report.diagnostics if d.source == "guard"]
            assert len(guard_diags) == 1
        assert interp.instances[0].status == RUNNING
        assert interp.instances[0].active_state == "a"

    def test_action_error_skips_block_and_continues(self):
        probe = Probe({"sense": True, "into": None})
        text = """
        (machine M
          (state a (onexit [kaboom]))
          (state b (onentry [probe into]))
          (on go a -> b t-go)
          (event go [probe sense]))
        (spawn M a)
        """
        interp = make(text, hosts={"probe": probe})
        interp.start()
        report = interp.tick()
        assert report.transitions_taken == [("M", "t-go")]
        assert "into" in probe.selectors()
        assert any(d.source == "action" for d in report.diagnostics)

    def test_non_boolean_guard_is_an_error_not_a_trigger(self):
        text = """
        (machine M
          (state a) (state b)
          (on go a -> b t-go)
          (event go [1.0]))
        (spawn M a)
        """
        interp = make(text)
        interp.start()
        report = interp.tick()
        assert report.transitions_taken == []
        assert any("must evaluate to a boolean" in d.message for d in report.diagnostics)

    def test_transition_to_unknown_target_never_eligible(self):
        interp = make("(machine M (state a) (eps a -> ghost t-go)) (spawn M a)")
        interp.start()
        report = interp.tick()
        assert report.transitions_taken == []
        assert interp.instances[0].status == RUNNING


class TestNesting:
    NESTED = """
    (machine Outer
      (state top
        (onentry [probe outer_in])
        (onexit [probe outer_out])
        (machine Inner
          (var depth := [2])
          (state walk (onentry [probe inner_in]) (onexit [probe inner_out])))
        (spawn Inner walk))
      (state other)
      (on leave top -> other t-leave)
      (event leave [probe sense]))
    (spawn Outer top)
    """

    def probe(self):
        return Probe({
            "outer_in": None, "outer_out": None,
            "inner_in": None, "inner_out": None,
            "sense": False,
        })

    def test_nested_machine_enters_on_the_enclosing_entry_tick(self):
        probe = self.probe()
        interp = make(self.NESTED, hosts={"probe": probe})
        interp.start()
        assert probe.calls == []
        interp.tick()  # outer onentry, outer guards, then the nested entry
        assert probe.selectors() == ["outer_in", "sense", "inner_in"]
        interp.tick()
        assert probe.selectors().count("inner_in") == 1

    def test_active_configuration_lists_child_first(self):
        interp = make(self.NESTED, hosts={"probe": self.probe()})
        interp.start()
        interp.tick()
        interp.tick()
        config = interp.active_configuration()
        assert [(path, state) for path, state, _ in config] == [
            ("Outer/top/Inner", "walk"),
            ("Outer", "top"),
        ]
        inner_vars = config[0][2]
        assert inner_vars["depth"] == 2

    def test_exit_runs_onexits_deepest_first(self):
        probe = self.probe()
        interp = make(self.NESTED, hosts={"probe": probe})
        interp.start()
        interp.tick()
        interp.tick()
        probe.responses["sense"] = True
        interp.tick()
        order = [s for s in probe.selectors() if s in ("inner_out", "outer_out")]
        assert order == ["inner_out", "outer_out"]
        assert interp.instances[0].nested is None

    def test_reentry_respawns_nested_fresh(self):
        text = """
        (machine Outer
          (state top
            (machine Inner (state walk))
            (spawn Inner walk))
          (state other)
          (on leave top -> other t-leave)
          (on back other -> top t-back)
          (event leave [probe sense])
          (event back [probe back]))
        (spawn Outer top)
        """
        probe = Probe({"sense": False, "back": False})
        interp = make(text, hosts={"probe": probe})
        interp.start()
        interp.tick()
        first_child = interp.instances[0].nested
        assert first_child is not None
        probe.responses["sense"] = True
        interp.tick()
        assert interp.instances[0].nested is None
        probe.responses["sense"] = False
        probe.responses["back"] = True
        interp.tick()
        second_child = interp.instances[0].nested
        assert second_child is not None
        assert second_child is not first_child

    def test_outer_transition_preempts_inner(self):
        text = """
        (machine Outer
          (state top
            (machine Inner
              (state w) (state v)
              (on inner_go w -> v t-inner))
            (spawn Inner w))
          (state other)
          (on outer_go top -> other t-outer)
          (event outer_go [probe outer])
          (event inner_go [probe inner]))
        (spawn Outer top)
        """
        probe = Probe({"outer": False, "inner": False})
        interp = make(text, hosts={"probe": probe})
        interp.start()
        interp.tick()
        interp.tick()
        probe.responses["outer"] = True
        probe.responses["inner"] = True
        report = interp.tick()
        assert [name for _, name in report.transitions_taken] == ["t-outer"]

    def test_nested_event_resolves_in_enclosing_machine(self):
        text = """
        (machine Outer
          (state top
            (machine Inner
              (state w) (state v)
              (on shared w -> v t-in))
            (spawn Inner w))
          (event shared [probe sense]))
        (spawn Outer top)
        """
        probe = Probe({"sense": True})
        interp = make(text, hosts={"probe": probe})
        interp.start()
        report = interp.tick()
        assert ("Outer/top/Inner", "t-in") in report.transitions_taken


class TestActiveConfiguration:
    def test_snapshot_of_idled_machine_is_empty(self):
        interp = make("(machine M (state a)) (spawn M nosuch)")
        interp.start()
        assert interp.active_configuration() == []

    def test_determinism_of_transition_trace(self, stop_program_text):
        def run():
            readings = iter([False, False, True, True, False, True] * 5)
            bridge = Probe()
            bridge.responses.update({
                "uniqueInstance": bridge,
                "forward:": None,
                "stop": None,
                "isThereAnObstacle:": lambda _d: next(readings),
            })
            interp = make(stop_program_text, hosts={"RobulabBridge": bridge})
            interp.start()
            trace = []
            for _ in range(30):
                trace.extend(interp.tick().transitions_taken)
            return trace

        assert run() == run()
