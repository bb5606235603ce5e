import json
import random
from collections import deque

import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from appliance.bench import (
    DEFAULT_PERTURBATIONS,
    WrongCurrentValue,
    WrongDirection,
    WrongRangeBound,
    WrongStep,
    WrongValueOrder,
    aggregate,
    check_identities,
    optimal_steps,
    parse_perturbations,
    perturb,
    run_suite,
    save_report,
    spl_term,
)
from appliance.errors import GoalUnreachable, NotApplicable
from appliance.model import NeighborBackward
from appliance.schema import fixtures_root, load_bundle, load_bundles
from appliance.simulator import initial_state, run_actions
from appliance.values import ContinuousSpec, DiscreteSpec, value_lattice, values_equal
from helpers import DIAL, basic_dehumidifier, dial_model, goal, policy, random_model, timer_model


def brute_force_steps(model, pol, g, limit=200_000):
    """Plain BFS over full simulator states with the policy's keys."""
    keys = sorted({a for f in pol.features for s in model.feature(f).steps for a in s.actions})
    durations = {a: model.action(a).hold_duration for a in keys}

    def done(state):
        return all(values_equal(state.values[model.var_index[v]], t) for v, t in g.assignments)

    start = initial_state(model)
    seen = {start: 0}
    queue = deque([start])
    while queue:
        s = queue.popleft()
        if done(s):
            return seen[s]
        for a in keys:
            n = run_actions(model, s, [(a, 1, durations[a])])
            if n not in seen:
                seen[n] = seen[s] + 1
                if len(seen) > limit:
                    return "too big"
                queue.append(n)
    return None


class TestOracle:
    def test_small_examples(self):
        m = basic_dehumidifier()
        assert optimal_steps(m, policy("turn_on_off"), goal(variable_power_on_off="on")) == 1
        assert optimal_steps(m, policy("turn_on_off"), goal(variable_power_on_off="off")) == 0
        both = policy("turn_on_off", "adjust_fan_speed")
        assert optimal_steps(m, both, goal(variable_power_on_off="on", variable_fan_speed="high")) == 3

    def test_unreachable(self):
        m = timer_model(current="30", cyclic=False, backward=False)
        with pytest.raises(GoalUnreachable):
            optimal_steps(m, policy("set_timer"), goal(timer="10"))

    @settings(max_examples=80, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.integers(0, 2**32 - 1))
    def test_matches_brute_force_on_random_models(self, model_seed, goal_seed):
        m = random_model(random.Random(model_seed))
        rng = random.Random(goal_seed)
        feats = [f.name for f in m.features]
        chosen = rng.sample(feats, rng.randint(1, min(2, len(feats))))
        pol = policy(*chosen)
        vars_ = sorted({v for f in chosen for v in m.feature_variables(f)} - {m.buffer_variable})
        assume(vars_)
        picked = rng.sample(vars_, rng.randint(1, len(vars_)))
        g = goal(**{v: rng.choice(value_lattice(m.variable(v).spec)) for v in picked})
        expect = brute_force_steps(m, pol, g)
        assume(expect != "too big")
        if expect is None:
            with pytest.raises(GoalUnreachable):
                optimal_steps(m, pol, g)
        else:
            assert optimal_steps(m, pol, g) == expect

    @pytest.mark.parametrize("name", [b.name for b in load_bundles(fixtures_root())])
    def test_fixture_labels_match_brute_force(self, name):
        b = load_bundle(fixtures_root() / name)
        for t in b.tasks:
            expect = brute_force_steps(b.model_doc.model, t.policy, t.goal, limit=100_000)
            if expect == "too big":
                continue
            assert t.optimal_execution_steps == expect, t.instruction


class TestPerturb:
    def test_deterministic(self):
        m = load_bundle(fixtures_root() / "microwave_combi").model_doc.model
        for p in DEFAULT_PERTURBATIONS:
            assert perturb(m, p, 7) == perturb(m, p, 7)

    def test_doubled_step(self):
        doc = perturb(timer_model(), WrongStep(2), 0, "timer")
        assert doc.model.variable("timer").spec == ContinuousSpec(((0, 60, 20),), "min")
        assert doc.provenance.kind == "perturbed"

    def test_range_bound(self):
        doc = perturb(timer_model(), WrongRangeBound(-2), 0, "timer")
        assert value_lattice(doc.model.variable("timer").spec)[-1] == "40"

    def test_dial_order_is_not_a_rotation(self):
        spec = perturb(dial_model(), WrongValueOrder(), 3, "variable_function").model.variable("variable_function").spec
        assert isinstance(spec, DiscreteSpec)
        assert sorted(spec.ordered_values) == sorted(DIAL)
        assert all(list(spec.ordered_values) != list(DIAL[i:] + DIAL[:i]) for i in range(7))

    def test_current_value_shift(self):
        doc = perturb(timer_model(current="60"), WrongCurrentValue(1), 0, "timer")
        assert doc.model.variable("timer").current == "0"

    def test_direction_swap(self):
        doc = perturb(timer_model(), WrongDirection(), 0, "timer")
        assert isinstance(doc.model.action("press_plus").klass, NeighborBackward)

    def test_not_applicable(self):
        with pytest.raises(NotApplicable):
            perturb(basic_dehumidifier(), WrongStep(2), 0, "variable_fan_speed")

    def test_parse(self):
        assert parse_perturbations("all") == list(DEFAULT_PERTURBATIONS)
        assert parse_perturbations("none") == []
        assert parse_perturbations("wrong_step:3,wrong_direction") == [WrongStep(3), WrongDirection()]
        with pytest.raises(ValueError):
            parse_perturbations("wrong_colour")


class TestMetrics:
    def test_spl_term(self):
        assert spl_term(True, 4, 8) == 0.5
        assert spl_term(True, 4, 4) == 1.0
        assert spl_term(False, 4, 4) == 0.0
        assert spl_term(True, 0, 0) == 1.0

    def test_aggregate_ignores_inapplicable_rows(self):
        rows = [
            {"applicable": True, "success": True, "optimal_steps": 2, "execution_steps": 4, "reasoning_steps": 1},
            {"applicable": True, "success": False, "optimal_steps": 2, "execution_steps": 9, "reasoning_steps": 3},
            {"applicable": False, "success": False, "optimal_steps": None, "execution_steps": 0, "reasoning_steps": 0},
        ]
        a = aggregate(rows)
        assert a["n"] == 2 and a["SR"] == 0.5 and a["SPL"] == 0.25

    def test_identity_checker_catches_a_bad_report(self):
        row = {"applicable": True, "success": True, "optimal_steps": 5, "execution_steps": 3, "perturbation": "none"}
        agg = {"SR": 1.0, "SPL": 1.0}
        report = {"rows": [row], "aggregates": {"all": agg, "by_perturbation": {"none": agg}}}
        assert check_identities(report)["execution_ge_optimal_on_success"] is False


class TestSuite:
    def test_truth_beliefs_are_perfect(self):
        report = run_suite(load_bundles(fixtures_root()))
        assert report["aggregates"]["all"]["SR"] == 1.0
        assert report["aggregates"]["all"]["SPL"] == 1.0
        assert all(report["identities"].values())

    def test_repair_beats_no_repair(self):
        bundles = load_bundles(fixtures_root())
        on = run_suite(bundles, list(DEFAULT_PERTURBATIONS), jobs=2)
        off = run_suite(bundles, list(DEFAULT_PERTURBATIONS), jobs=2, repair=False)
        for label, agg in on["aggregates"]["by_perturbation"].items():
            assert agg["n"] > 0
            assert agg["SR"] == 1.0, label
            assert agg["SR"] > off["aggregates"]["by_perturbation"][label]["SR"], label
        assert all(on["identities"].values()) and all(off["identities"].values())

    def test_reports_are_byte_identical(self):
        bundles = load_bundles(fixtures_root())[:3]
        a = save_report(run_suite(bundles, [WrongValueOrder(), WrongStep(2)], seed=5))
        b = save_report(run_suite(bundles, [WrongValueOrder(), WrongStep(2)], seed=5))
        assert a == b
        assert json.loads(a)["config"]["seed"] == 5
