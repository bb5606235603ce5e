"""Regenerate the bundled appliance fixtures.

Each bundle directory gets manual.txt, model.appliance.json and
tasks.tasks.json.  Optimal step labels come from the shortest-path search in appliance.bench.

    python scripts/build_fixtures.py [--check]
"""

from __future__ import annotations

import argparse
import sys
import textwrap
from pathlib import Path

from appliance.bench import optimal_steps
from appliance.model import (
    ApplianceModel,
    Digit,
    Feature,
    FeatureStep,
    GoalState,
    GoTo,
    Guards,
    NeighborBackward,
    NeighborForward,
    ProgramMap,
    SymbolicAction,
    TaskPolicy,
    VariableState,
)
from appliance.schema import (
    MANUAL_FILE,
    MODEL_FILE,
    TASKS_FILE,
    ModelDocument,
    Provenance,
    TaskDocument,
    fixtures_root,
    save_model,
    save_task_suite,
)
from appliance.validator import validate
from appliance.values import ContinuousSpec, DiscreteSpec, InputBufferSpec, TimeSpec


def var(name, spec, current):
    return VariableState(name, spec, current)


def press(name, klass):
    return SymbolicAction(name, "press", klass)


def step(i, actions, variable=None, fixed=(), fmt=None):
    return FeatureStep(i, tuple(actions), variable, tuple(fixed), fmt)


def single(name, action, variable):
    return Feature(name, (step(1, [action], variable),))


def task(instruction, assignments, features):
    goal = GoalState(tuple(assignments.items()))
    return instruction, goal, TaskPolicy(tuple(features), tuple(assignments))


# ---------------------------------------------------------------------------


def dehumidifier():
    model = ApplianceModel(
        variables=(
            var("variable_power_on_off", DiscreteSpec(("on", "off")), "off"),
            var("variable_fan_speed", DiscreteSpec(("low", "mid", "high")), "low"),
            var("variable_humidity", ContinuousSpec(((30, 80, 5),), "%"), "60"),
            var("variable_timer", ContinuousSpec(((0, 12, 1),), "hours"), "0"),
        ),
        actions=(
            press("press_power_button", NeighborForward("variable_power_on_off")),
            press("press_speed_button", NeighborForward("variable_fan_speed")),
            press("press_humidity_up", NeighborForward("variable_humidity")),
            press("press_humidity_down", NeighborBackward("variable_humidity")),
            press("press_timer_button", NeighborForward("variable_timer")),
        ),
        features=(
            single("turn_on_off", "press_power_button", "variable_power_on_off"),
            single("adjust_fan_speed", "press_speed_button", "variable_fan_speed"),
            Feature("adjust_humidity", (step(1, ["press_humidity_up", "press_humidity_down"], "variable_humidity"),)),
            single("set_timer", "press_timer_button", "variable_timer"),
        ),
    )
    manual = """
    Dehumidifier quick guide

    Power: press the power button to switch the unit on or off.
    Fan speed: each press of the speed button moves to the next speed,
    low, mid, high, and back to low.
    Target humidity: use the up and down humidity keys. The target goes from
    30% to 80% in 5% increments and wraps around at either end.
    Timer: each press of the timer button adds one hour, from 0 to 12 hours;
    one more press after 12 returns to 0 (timer off).
    """
    tasks = [
        task("Set the humidity to 50%.", {"variable_humidity": "50"}, ["adjust_humidity"]),
        task(
            "Turn on the dehumidifier and set the fan to high.",
            {"variable_power_on_off": "on", "variable_fan_speed": "high"},
            ["turn_on_off", "adjust_fan_speed"],
        ),
        task("Set the timer to 4 hours.", {"variable_timer": "4"}, ["set_timer"]),
        task(
            "Switch it on and keep the room at 75% humidity.",
            {"variable_power_on_off": "on", "variable_humidity": "75"},
            ["turn_on_off", "adjust_humidity"],
        ),
        task(
            "Fan on mid, humidity 35%, timer 11 hours.",
            {"variable_fan_speed": "mid", "variable_humidity": "35", "variable_timer": "11"},
            ["adjust_fan_speed", "adjust_humidity", "set_timer"],
        ),
    ]
    return model, manual, tasks


def bottle_washer():
    model = ApplianceModel(
        variables=(
            var("power", DiscreteSpec(("off", "on")), "off"),
            var("mode", DiscreteSpec(("auto", "wash only", "dry only", "sterilize")), "auto"),
            var("drying_time", ContinuousSpec(((0, 90, 15),), "min"), "30"),
            var("running", DiscreteSpec(("off", "on")), "off"),
        ),
        actions=(
            press("press_power", NeighborForward("power")),
            press("press_mode", NeighborForward("mode")),
            press("press_drying", NeighborForward("drying_time")),
            press("press_start", GoTo((("running", "on"),))),
        ),
        features=(
            single("power_on_off", "press_power", "power"),
            single("select_mode", "press_mode", "mode"),
            single("set_drying_time", "press_drying", "drying_time"),
            single("start", "press_start", "running"),
        ),
        guards=Guards(power_variable="power"),
    )
    manual = """
    Bottle washer and dryer

    Press Power first; no other key responds while the washer is off.
    Mode cycles auto, wash only, dry only, sterilize.
    Drying: every press adds 15 minutes, up to 90; the next press goes back
    to 0.
    Start begins the selected cycle.
    """
    tasks = [
        task(
            "Turn on the washer and set the drying time to 45 minutes.",
            {"power": "on", "drying_time": "45"},
            ["power_on_off", "set_drying_time"],
        ),
        task("Power on and pick the sterilize mode.", {"power": "on", "mode": "sterilize"}, ["power_on_off", "select_mode"]),
        task(
            "Power on, dry only, and start.",
            {"power": "on", "mode": "dry only", "running": "on"},
            ["power_on_off", "select_mode", "start"],
        ),
        task(
            "Switch on and turn drying off (0 minutes).",
            {"power": "on", "drying_time": "0"},
            ["power_on_off", "set_drying_time"],
        ),
        task(
            "Power on, wash only, dry for 15 minutes, then start.",
            {"power": "on", "mode": "wash only", "drying_time": "15", "running": "on"},
            ["power_on_off", "select_mode", "set_drying_time", "start"],
        ),
    ]
    return model, manual, tasks


def rice_cooker():
    menu = ("white rice", "brown rice", "porridge", "quick cook", "steam")
    model = ApplianceModel(
        variables=(
            var("menu", DiscreteSpec(menu), "brown rice"),
            var("display_mode", DiscreteSpec(("clock", "delay")), "clock"),
            var("delay", TimeSpec((("00:00:00", "12:00:00", 1800),)), "00:00:00"),
            var("start", DiscreteSpec(("off", "on")), "off"),
        ),
        actions=(
            press("press_menu", NeighborForward("menu")),
            press("press_delay", GoTo((("display_mode", "delay"),))),
            press("press_hour_up", NeighborForward()),
            press("press_hour_down", NeighborBackward()),
            press("press_start", GoTo((("start", "on"),))),
        ),
        features=(
            single("select_menu", "press_menu", "menu"),
            Feature(
                "set_delay",
                (
                    step(1, ["press_delay"], fixed=[("display_mode", "delay")]),
                    step(2, ["press_hour_up", "press_hour_down"], "delay"),
                ),
            ),
            single("start_cooking", "press_start", "start"),
        ),
    )
    manual = """
    Rice cooker

    Menu: each press selects the next program: white rice, brown rice,
    porridge, quick cook, steam, then white rice again.
    Delay timer: press Delay, then use Hour + and Hour - to choose when the
    cooking should finish, in half-hour steps from 0:00 to 12:00. Going past
    12:00 returns to 0:00 and the other way round.
    Start: press Start to begin cooking.
    """
    tasks = [
        task(
            "Cook white rice with a 30 minute delay.",
            {"menu": "white rice", "delay": "00:30:00", "start": "on"},
            ["select_menu", "set_delay", "start_cooking"],
        ),
        task("Start cooking in six hours.", {"delay": "06:00:00", "start": "on"}, ["set_delay", "start_cooking"]),
        task(
            "Make porridge ready in eleven and a half hours.",
            {"menu": "porridge", "delay": "11:30:00"},
            ["select_menu", "set_delay"],
        ),
        task("Steam now.", {"menu": "steam", "start": "on"}, ["select_menu", "start_cooking"]),
        task(
            "Quick cook with a one hour delay.",
            {"menu": "quick cook", "delay": "01:00:00", "start": "on"},
            ["select_menu", "set_delay", "start_cooking"],
        ),
    ]
    return model, manual, tasks


DIAL = ("Fermentation", "Lower heater", "Upper heater", "Lower & upper heater", "Convection", "Rotary", "Off")


def microwave_combi():
    model = ApplianceModel(
        variables=(
            var("function", DiscreteSpec(DIAL), "Off"),
            var("temp_select", DiscreteSpec(("upper", "lower")), "upper"),
            var("upper_temp", ContinuousSpec(((100, 250, 10),), "C"), "180"),
            var("lower_temp", ContinuousSpec(((100, 250, 10),), "C"), "180"),
            var("cook_time", ContinuousSpec(((0, 60, 5),), "min"), "0"),
        ),
        actions=(
            SymbolicAction("turn_function_dial", "turn", NeighborForward("function")),
            press("press_upper_temp", GoTo((("temp_select", "upper"),))),
            press("press_lower_temp", GoTo((("temp_select", "lower"),))),
            press("press_plus", NeighborForward()),
            press("press_minus", NeighborBackward()),
            SymbolicAction("turn_time_dial_cw", "turn", NeighborForward("cook_time")),
            SymbolicAction("turn_time_dial_ccw", "turn", NeighborBackward("cook_time")),
        ),
        features=(
            single("select_function", "turn_function_dial", "function"),
            Feature(
                "set_upper_temp",
                (
                    step(1, ["press_upper_temp"], fixed=[("temp_select", "upper")]),
                    step(2, ["press_plus", "press_minus"], "upper_temp"),
                ),
            ),
            Feature(
                "set_lower_temp",
                (
                    step(1, ["press_lower_temp"], fixed=[("temp_select", "lower")]),
                    step(2, ["press_plus", "press_minus"], "lower_temp"),
                ),
            ),
            Feature("set_cook_time", (step(1, ["turn_time_dial_cw", "turn_time_dial_ccw"], "cook_time"),)),
        ),
    )
    manual = """
    Combination oven

    Function dial: turning the dial clockwise steps through Fermentation,
    Lower heater, Upper heater, Lower & upper heater, Convection, Rotary and
    Off, then starts over.
    Temperatures: press Upper or Lower to choose which heater to set, then
    use + and - in 10 degree steps between 100 and 250 C.
    Timer dial: turn clockwise to add 5 minutes, counter-clockwise to remove
    5 minutes; the timer runs from 0 to 60 minutes and wraps.
    """
    tasks = [
        task(
            "Bake with upper and lower heat at 150 C each for 20 minutes.",
            {"function": "Lower & upper heater", "upper_temp": "150", "lower_temp": "150", "cook_time": "20"},
            ["select_function", "set_upper_temp", "set_lower_temp", "set_cook_time"],
        ),
        task(
            "Convection for 45 minutes.",
            {"function": "Convection", "cook_time": "45"},
            ["select_function", "set_cook_time"],
        ),
        task("Set the upper heater to 250 C.", {"upper_temp": "250"}, ["set_upper_temp"]),
        task(
            "Rotary grill, lower heater at 100 C.",
            {"function": "Rotary", "lower_temp": "100"},
            ["select_function", "set_lower_temp"],
        ),
        task(
            "Proof the dough for 5 minutes.",
            {"function": "Fermentation", "cook_time": "5"},
            ["select_function", "set_cook_time"],
        ),
    ]
    return model, manual, tasks


def microwave_keypad():
    digits = tuple(press(f"press_{d}", Digit(d)) for d in range(10))
    model = ApplianceModel(
        variables=(
            var("cook_time", TimeSpec((("00:00:00", "00:30:00", 1),)), "00:00:00"),
            var("power_level", ContinuousSpec(((1, 10, 1),), "level"), "10"),
            var("program", DiscreteSpec(("popcorn", "pizza", "soup")), "popcorn"),
            var("popcorn_amount", DiscreteSpec(("1 bag", "2 bags", "3 bags")), "1 bag"),
            var("pizza_slices", DiscreteSpec(("1 slice", "2 slices", "3 slices", "4 slices")), "1 slice"),
            var("soup_cups", DiscreteSpec(("1 cup", "2 cups")), "1 cup"),
            var("keypad_entry", InputBufferSpec(6), ""),
            var("running", DiscreteSpec(("off", "on")), "off"),
        ),
        actions=digits
        + (
            press("press_time_cook", GoTo((("cook_time", "00:00:00"),))),
            press("press_power_level", NeighborBackward("power_level")),
            press("press_program", NeighborForward("program")),
            press("press_amount", NeighborForward("program_amount")),
            press("press_start", GoTo((("running", "on"),))),
            press("press_stop", GoTo((("running", "off"),))),
        ),
        features=(
            Feature(
                "set_cook_time",
                (
                    step(1, ["press_time_cook"], fixed=[("cook_time", "00:00:00")]),
                    step(2, [a.name for a in digits], "cook_time", fmt="mmss"),
                ),
            ),
            single("set_power_level", "press_power_level", "power_level"),
            Feature(
                "select_program",
                (step(1, ["press_program"], "program"), step(2, ["press_amount"], "program_amount")),
            ),
            single("start", "press_start", "running"),
            single("stop", "press_stop", "running"),
        ),
        program_map=ProgramMap(
            "program",
            "program_amount",
            (("popcorn", "popcorn_amount"), ("pizza", "pizza_slices"), ("soup", "soup_cups")),
        ),
    )
    manual = """
    Keypad microwave

    Time cook: press Time Cook, which clears the timer, then type minutes and
    seconds on the number pad. For six minutes type 6, 0, 0.
    Power level: each press of Power Level lowers the level by one, from 10
    down to 1; the press after 1 returns to 10.
    Auto programs: Program selects popcorn, pizza or soup. Amount then steps
    through the servings for the selected program (bags, slices or cups).
    Start runs the oven; Stop halts it.
    """
    tasks = [
        task(
            "Heat for 6 minutes.",
            {"cook_time": "00:06:00", "running": "on"},
            ["set_cook_time", "start"],
        ),
        task(
            "Cook at power level 7 for 1 minute 30 seconds.",
            {"power_level": "7", "cook_time": "00:01:30", "running": "on"},
            ["set_power_level", "set_cook_time", "start"],
        ),
        task(
            "Reheat three slices of pizza.",
            {"program": "pizza", "pizza_slices": "3 slices", "running": "on"},
            ["select_program", "start"],
        ),
        task("Set up two cups of soup.", {"program": "soup", "soup_cups": "2 cups"}, ["select_program"]),
        task(
            "Defrost at power level 3 for 10 minutes.",
            {"power_level": "3", "cook_time": "00:10:00"},
            ["set_power_level", "set_cook_time"],
        ),
    ]
    return model, manual, tasks


def bread_maker():
    menus = ("basic", "french", "whole wheat", "sweet", "quick", "dough", "jam", "bake")
    model = ApplianceModel(
        variables=(
            var("menu", DiscreteSpec(menus), "basic"),
            var("crust", DiscreteSpec(("light", "medium", "dark")), "light"),
            var("loaf_size", DiscreteSpec(("small", "medium", "large")), "medium"),
            var("delay", TimeSpec((("00:00:00", "13:00:00", 600),)), "00:00:00"),
            var("start", DiscreteSpec(("off", "on")), "off"),
        ),
        actions=(
            press("press_menu", NeighborForward("menu")),
            press("press_color", NeighborForward("crust")),
            press("press_loaf", NeighborForward("loaf_size")),
            press("press_timer_up", NeighborForward("delay")),
            press("press_timer_down", NeighborBackward("delay")),
            press("press_start", GoTo((("start", "on"),))),
        ),
        features=(
            single("select_menu", "press_menu", "menu"),
            single("select_crust", "press_color", "crust"),
            single("select_loaf_size", "press_loaf", "loaf_size"),
            Feature("set_delay", (step(1, ["press_timer_up", "press_timer_down"], "delay"),)),
            single("start", "press_start", "start"),
        ),
    )
    manual = """
    Bread maker

    Menu steps through basic, french, whole wheat, sweet, quick, dough, jam
    and bake. Color picks a light, medium or dark crust. Loaf picks small,
    medium or large.
    Delay: the timer arrows change the finish delay in 10 minute steps from
    0:00 up to 13:00, wrapping at both ends.
    Start begins the program.
    """
    tasks = [
        task(
            "Bake a large French loaf with a medium crust, ready in 2 hours.",
            {"menu": "french", "crust": "medium", "loaf_size": "large", "delay": "02:00:00", "start": "on"},
            ["select_menu", "select_crust", "select_loaf_size", "set_delay", "start"],
        ),
        task("Make dough now.", {"menu": "dough", "start": "on"}, ["select_menu", "start"]),
        task("Small loaf, dark crust.", {"crust": "dark", "loaf_size": "small"}, ["select_crust", "select_loaf_size"]),
        task(
            "Start with a delay of 12 hours 50 minutes.",
            {"delay": "12:50:00", "start": "on"},
            ["set_delay", "start"],
        ),
        task("Jam with a medium crust.", {"menu": "jam", "crust": "medium"}, ["select_menu", "select_crust"]),
    ]
    return model, manual, tasks


def washing_machine():
    programs = ("normal", "heavy", "delicate", "quick", "rinse", "spin")
    model = ApplianceModel(
        variables=(
            var("power", DiscreteSpec(("off", "on")), "off"),
            var("program", DiscreteSpec(programs), "quick"),
            var("water_level", ContinuousSpec(((25, 65, 10),), "L"), "45"),
            var("preset", ContinuousSpec(((0, 2, 2), (2, 12, 1)), "hours"), "0"),
            var("running", DiscreteSpec(("off", "on")), "off"),
            var("child_lock", DiscreteSpec(("unlocked", "locked")), "unlocked"),
        ),
        actions=(
            press("press_power", NeighborForward("power")),
            press("press_program", NeighborForward("program")),
            press("press_water_level", NeighborForward("water_level")),
            press("press_preset_up", NeighborForward("preset")),
            press("press_preset_down", NeighborBackward("preset")),
            press("press_start", GoTo((("running", "on"),))),
            SymbolicAction("hold_child_lock", "hold", NeighborForward("child_lock"), 3),
        ),
        features=(
            single("power_on_off", "press_power", "power"),
            single("select_program", "press_program", "program"),
            single("set_water_level", "press_water_level", "water_level"),
            Feature("set_preset", (step(1, ["press_preset_up", "press_preset_down"], "preset"),)),
            single("start", "press_start", "running"),
            single("child_lock", "hold_child_lock", "child_lock"),
        ),
        guards=Guards(power_variable="power", lock_variable="child_lock"),
    )
    manual = """
    Washing machine

    Power turns the machine on. Nothing else responds while it is off.
    Program cycles normal, heavy, delicate, quick, rinse, spin.
    Water level steps 25, 35, 45, 55, 65 litres and back to 25.
    Preset (finish later): the arrows choose 0 (off), 2 hours, then every
    hour up to 12 hours.
    Start begins washing.
    Child lock: hold the lock key for 3 seconds to lock or unlock the panel.
    While locked, every other key is ignored.
    """
    tasks = [
        task(
            "Turn on the washing machine, choose Normal with 55 L of water, finish in 4 hours, start and lock the panel.",
            {
                "power": "on",
                "program": "normal",
                "water_level": "55",
                "preset": "4",
                "running": "on",
                "child_lock": "locked",
            },
            ["power_on_off", "select_program", "set_water_level", "set_preset", "start", "child_lock"],
        ),
        task(
            "Wash delicates now.",
            {"power": "on", "program": "delicate", "running": "on"},
            ["power_on_off", "select_program", "start"],
        ),
        task(
            "Low water, finish in 12 hours.",
            {"power": "on", "water_level": "25", "preset": "12"},
            ["power_on_off", "set_water_level", "set_preset"],
        ),
        task("Switch on and lock the panel.", {"power": "on", "child_lock": "locked"}, ["power_on_off", "child_lock"]),
        task(
            "Spin only, finish in 2 hours.",
            {"power": "on", "program": "spin", "preset": "2"},
            ["power_on_off", "select_program", "set_preset"],
        ),
    ]
    return model, manual, tasks


BUILDERS = {
    "dehumidifier": dehumidifier,
    "bottle_washer": bottle_washer,
    "rice_cooker": rice_cooker,
    "microwave_combi": microwave_combi,
    "microwave_keypad": microwave_keypad,
    "bread_maker": bread_maker,
    "washing_machine": washing_machine,
}


def build(root: Path, check: bool = False) -> int:
    stale = 0
    for name, fn in BUILDERS.items():
        model, manual, tasks = fn()
        diags = [d for d in validate(model) if d.severity == "error"]
        if diags:
            raise SystemExit(f"{name}: {diags}")
        docs = []
        for instruction, goal, policy in tasks:
            label = optimal_steps(model, policy, goal)
            docs.append(TaskDocument(instruction, goal, policy, label))
        files = {
            MANUAL_FILE: (textwrap.dedent(manual).strip() + "\n").encode(),
            MODEL_FILE: save_model(ModelDocument(model, Provenance("ground_truth", f"{name} reference model"))),
            TASKS_FILE: save_task_suite(docs),
        }
        d = root / name
        d.mkdir(parents=True, exist_ok=True)
        for fname, data in files.items():
            path = d / fname
            if check:
                if not path.exists() or path.read_bytes() != data:
                    print(f"stale: {path}")
                    stale += 1
            else:
                path.write_bytes(data)
        print(f"{name}: {[t.optimal_execution_steps for t in docs]}")
    return stale


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", type=Path, default=fixtures_root())
    ap.add_argument("--check", action="store_true", help="report stale files instead of writing")
    args = ap.parse_args(argv)
    return 1 if build(args.out, args.check) else 0


if __name__ == "__main__":
    sys.exit(main())
