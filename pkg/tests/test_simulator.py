from decimal import Decimal

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from appliance.errors import UnknownAction
from appliance.model import FeatureCursor
from appliance.schema import fixtures_root, load_bundle
from appliance.simulator import Simulator, parse_digits, run_script
from appliance.validator import validate
from appliance.values import lattice_index
from helpers import basic_dehumidifier, keypad_model, timer_model


def bundle_model(name):
    return load_bundle(fixtures_root() / name).model_doc.model


def test_reset_restores_declared_values():
    sim = Simulator(basic_dehumidifier())
    sim.step("press_power_button")
    assert sim.reset().raw == ""
    assert sim.render_display() == "variable_power_on_off=off\nvariable_fan_speed=low\n"
    sim.reset()
    assert sim.render_display() == "variable_power_on_off=off\nvariable_fan_speed=low\n"
    assert sim.state.cursor == FeatureCursor("empty", 1)


def test_reset_leaves_model_valid():
    m = basic_dehumidifier()
    before = validate(m)
    Simulator(m).reset()
    assert validate(m) == before


def test_power_press_reports_changed_variable():
    obs = Simulator(basic_dehumidifier()).step("press_power_button")
    assert obs.lines == (("variable_power_on_off", "on"),)
    assert obs.raw == "variable_power_on_off=on\n"


def test_repeated_press_reports_final_value_once():
    sim = Simulator(timer_model())
    assert sim.step("press_plus", 3).raw == "timer=30\n"
    assert "timer=30" in sim.render_display()


def test_no_change_gives_empty_observation():
    m = timer_model(current="60", cyclic=False)
    assert Simulator(m).step("press_plus").raw == ""


def test_unknown_action():
    with pytest.raises(UnknownAction):
        Simulator(basic_dehumidifier()).step("press_nothing")


def test_render_is_stable():
    sim = Simulator(basic_dehumidifier())
    assert sim.render_display() == sim.render_display()


class TestGuards:
    def test_power_guard_blocks_other_keys(self):
        sim = Simulator(bundle_model("bottle_washer"))
        obs = sim.step("press_mode")
        assert obs.raw == "power=off\n"
        assert sim.step("press_power").raw == "power=on\n"
        assert sim.step("press_mode").raw == "mode=wash only\n"

    def test_lock_guard_wins_over_power(self):
        sim = Simulator(bundle_model("washing_machine"))
        sim.step("press_power")
        assert sim.step("hold_child_lock", 1, Decimal(3)).raw == "child_lock=locked\n"
        assert sim.step("press_program").raw == "child_lock=locked\n"
        assert sim.step("press_power").raw == "child_lock=locked\n"
        assert sim.step("hold_child_lock", 1, Decimal(3)).raw == "child_lock=unlocked\n"

    def test_short_hold_is_a_no_op(self):
        sim = Simulator(bundle_model("washing_machine"))
        sim.step("press_power")
        assert sim.step("hold_child_lock", 1, Decimal("2.9")).raw == ""
        assert sim.step("hold_child_lock").raw == "child_lock=locked\n"  # default is the declared duration

    @settings(max_examples=50, deadline=None)
    @given(st.lists(st.sampled_from(["press_power", "press_program", "press_water_level", "press_preset_up", "press_start"]), max_size=12))
    def test_locked_panel_ignores_everything_but_unlock(self, script):
        sim = Simulator(bundle_model("washing_machine"))
        sim.step("press_power")
        sim.step("hold_child_lock")
        frozen = sim.state.values
        for a in script:
            assert sim.step(a).raw == "child_lock=locked\n"
        assert sim.state.values == frozen


class TestCursor:
    def test_generic_keys_need_their_step(self):
        sim = Simulator(bundle_model("rice_cooker"))
        assert sim.step("press_hour_up").raw == ""
        assert sim.step("press_delay").raw == "display_mode=delay\n"
        assert sim.state.cursor == FeatureCursor("set_delay", 1)
        assert sim.step("press_hour_up", 2).raw == "delay=01:00:00\n"
        assert sim.state.cursor == FeatureCursor("set_delay", 2)

    def test_switching_features_resets_context(self):
        sim = Simulator(bundle_model("rice_cooker"))
        sim.step("press_delay")
        sim.step("press_menu")
        assert sim.state.cursor == FeatureCursor("select_menu", 1)
        assert sim.step("press_hour_up").raw == ""

    def test_entry_applies_fixed_effects(self):
        sim = Simulator(bundle_model("microwave_combi"))
        sim.step("press_lower_temp")
        assert sim.step("press_plus").raw == "lower_temp=190\n"
        assert sim.step("press_upper_temp").raw == "temp_select=upper\n"
        assert sim.step("press_minus").raw == "upper_temp=170\n"


class TestDigits:
    def test_six_minutes(self):
        sim = Simulator(keypad_model())
        sim.step("press_time_cook")
        for d in "600":
            sim.step(f"press_{d}")
        assert "cook_time=00:06:00" in sim.render_display()

    def test_invalid_intermediate_parse_keeps_value(self):
        sim = Simulator(keypad_model())
        sim.step("press_time_cook")
        sim.step("press_6")
        assert sim.step("press_0").raw == "keypad=60\n"  # 00:00:60 is not a time

    def test_other_key_clears_buffer(self):
        sim = Simulator(keypad_model())
        sim.step("press_time_cook")
        sim.step("press_5")
        assert sim.step("press_time_cook").lines[-1] == ("keypad", "")

    def test_digits_outside_entry_only_fill_buffer(self):
        sim = Simulator(keypad_model())
        assert sim.step("press_5").raw == "keypad=5\n"
        assert "cook_time=00:00:00" in sim.render_display()

    @pytest.mark.parametrize(
        "buf,fmt,out",
        [
            ("600", "mmss", "00:06:00"),
            ("", "mmss", "00:00:00"),
            ("130", "hhmm", "01:30:00"),
            ("75", "mmss", None),
            ("0042", "integer", "42"),
            ("", "integer", "0"),
        ],
    )
    def test_parse_digits(self, buf, fmt, out):
        assert parse_digits(buf, fmt) == out


class TestProgramMap:
    def test_amount_key_follows_selected_program(self):
        sim = Simulator(bundle_model("microwave_keypad"))
        assert sim.step("press_amount").raw == "popcorn_amount=2 bags\n"
        sim.step("press_program")
        assert sim.step("press_amount").raw == "pizza_slices=2 slices\n"


ACTIONS = {
    name: [a.name for a in bundle_model(name).actions]
    for name in ("dehumidifier", "bottle_washer", "rice_cooker", "microwave_combi", "microwave_keypad", "washing_machine")
}


@settings(max_examples=60, deadline=None)
@given(st.sampled_from(sorted(ACTIONS)), st.data())
def test_determinism_and_lattice_closure(name, data):
    model = bundle_model(name)
    script = data.draw(st.lists(st.sampled_from(ACTIONS[name]), max_size=20))
    text = "\n".join(f"{a},{data.draw(st.integers(1, 3))}" for a in script)
    assert run_script(model, text) == run_script(model, text)
    sim = Simulator(model)
    for a in script:
        sim.step(a)
        for v, val in zip(model.variables, sim.state.values):
            if v.name != model.buffer_variable:
                assert lattice_index(v.spec, val) is not None


def test_script_golden():
    script = "press_power_button\npress_speed_button,2\n# comment\n\npress_power_button,1\n"
    assert run_script(basic_dehumidifier(), script) == (
        "variable_power_on_off=on\nvariable_fan_speed=high\nvariable_power_on_off=off\n"
    )
