"""Model builders, independent oracles and a random model generator for the tests."""

from __future__ import annotations

import random
from collections import deque
from decimal import Decimal
from fractions import Fraction

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
from appliance.values import ContinuousSpec, DiscreteSpec, InputBufferSpec, TimeSpec

# ---------------------------------------------------------------------------
# small hand-written models


def basic_dehumidifier() -> ApplianceModel:
    """Two-variable dehumidifier: power toggle and a three-speed fan."""
    return ApplianceModel(
        variables=(
            VariableState("variable_power_on_off", DiscreteSpec(("on", "off")), "off"),
            VariableState("variable_fan_speed", DiscreteSpec(("low", "mid", "high")), "low"),
        ),
        actions=(
            SymbolicAction("press_power_button", "press", NeighborForward("variable_power_on_off")),
            SymbolicAction("press_speed_button", "press", NeighborForward("variable_fan_speed")),
        ),
        features=(
            Feature("turn_on_off", (FeatureStep(1, ("press_power_button",), "variable_power_on_off"),)),
            Feature("adjust_fan_speed", (FeatureStep(1, ("press_speed_button",), "variable_fan_speed"),)),
        ),
    )


def timer_model(low=0, high=60, step=10, current="0", *, cyclic=True, backward=True) -> ApplianceModel:
    actions = [SymbolicAction("press_plus", "press", NeighborForward("timer"))]
    if backward:
        actions.append(SymbolicAction("press_minus", "press", NeighborBackward("timer")))
    return ApplianceModel(
        variables=(VariableState("timer", ContinuousSpec(((low, high, step),), "min", cyclic), current),),
        actions=tuple(actions),
        features=(Feature("set_timer", (FeatureStep(1, tuple(a.name for a in actions), "timer"),)),),
    )


DIAL = ("Fermentation", "Lower heater", "Upper heater", "Lower & upper heater", "Convection", "Rotary", "Off")
# the faulty belief has the combined heater right after Off
DIAL_BELIEF = ("Fermentation", "Lower heater", "Upper heater", "Convection", "Rotary", "Off", "Lower & upper heater")


def dial_model(order=DIAL) -> ApplianceModel:
    return ApplianceModel(
        variables=(VariableState("variable_function", DiscreteSpec(tuple(order)), "Off"),),
        actions=(SymbolicAction("turn_function_dial_clockwise", "turn", NeighborForward("variable_function")),),
        features=(
            Feature("adjust_function", (FeatureStep(1, ("turn_function_dial_clockwise",), "variable_function"),)),
        ),
    )


def goal(**assignments) -> GoalState:
    return GoalState(tuple(assignments.items()))


def policy(*features, changing=()) -> TaskPolicy:
    return TaskPolicy(tuple(features), tuple(changing))


# ---------------------------------------------------------------------------
# independent oracles


def enumerate_points(spec) -> list[str]:
    """Lattice values computed with fractions, without the package's helpers."""
    if isinstance(spec, DiscreteSpec):
        return list(spec.ordered_values)
    out: list[Fraction] = []
    for seg in spec.ranges:
        lo, hi, st = (Fraction(str(x)) for x in (seg.low, seg.high, seg.step))
        x = lo
        while x <= hi:
            if not out or out[-1] != x:
                out.append(x)
            x += st
    if isinstance(spec, TimeSpec):
        return [f"{int(x) // 3600:02d}:{int(x) % 3600 // 60:02d}:{int(x) % 60:02d}" for x in out]
    return [_fmt(x) for x in out]


def _fmt(x: Fraction) -> str:
    d = Decimal(x.numerator) / Decimal(x.denominator)
    s = format(d.normalize(), "f")
    return "0" if s in ("-0", "0") else s


def bfs_presses(n: int, cyclic: bool, start: int, target: int, fwd: bool, bwd: bool) -> int | None:
    """Shortest number of single-step moves on a line or ring of ``n`` values."""
    seen = {start: 0}
    q = deque([start])
    while q:
        i = q.popleft()
        if i == target:
            return seen[i]
        nxt = []
        if fwd:
            nxt.append((i + 1) % n if cyclic else min(i + 1, n - 1))
        if bwd:
            nxt.append((i - 1) % n if cyclic else max(i - 1, 0))
        for j in nxt:
            if j not in seen:
                seen[j] = seen[i] + 1
                q.append(j)
    return None


# ---------------------------------------------------------------------------
# random admissible models

_WORDS = ["low", "mid", "high", "eco", "turbo", "auto", "quiet", "boost", "warm", "cool", "dry", "fresh"]


def random_spec(rng: random.Random):
    kind = rng.choice(["discrete", "continuous", "time"])
    cyclic = rng.random() < 0.7
    if kind == "discrete":
        k = rng.randint(1, 6)
        return DiscreteSpec(tuple(rng.sample(_WORDS, k)), cyclic)
    if kind == "continuous":
        step = rng.choice([Decimal("0.5"), Decimal(1), Decimal(5), Decimal(10)])
        segs, low = [], Decimal(rng.randint(0, 20))
        for _ in range(rng.randint(1, 2)):
            high = low + step * rng.randint(1, 8)
            segs.append((low, high, step))
            low = high
            step = rng.choice([step, step * 2])
        return ContinuousSpec(tuple(segs), rng.choice(["", "min", "C", "%"]), cyclic)
    step = rng.choice([60, 300, 600, 1800])
    low = step * rng.randint(0, 3)
    return TimeSpec(((low, low + step * rng.randint(1, 10), step),), cyclic)


def random_model(rng: random.Random) -> ApplianceModel:
    """A validator-clean model mixing the supported constructs."""
    variables: list[VariableState] = []
    actions: list[SymbolicAction] = []
    features: list[Feature] = []
    guards = Guards()

    def lattice_pick(spec):
        return rng.choice(enumerate_points(spec))

    if rng.random() < 0.4:
        variables.append(VariableState("power", DiscreteSpec(("off", "on")), rng.choice(["off", "on"])))
        actions.append(SymbolicAction("press_power", "press", NeighborForward("power")))
        features.append(Feature("power_on_off", (FeatureStep(1, ("press_power",), "power"),)))
        guards = Guards(power_variable="power")

    for i in range(rng.randint(1, 4)):
        name = f"var_{i}"
        spec = random_spec(rng)
        variables.append(VariableState(name, spec, lattice_pick(spec)))
        shape = rng.choice(["single", "both", "entry", "hold"])
        if shape == "hold":
            dur = rng.choice([1, 2, 3, Decimal("1.5")])
            actions.append(SymbolicAction(f"hold_{i}", "hold", NeighborForward(name), dur))
            features.append(Feature(f"feature_{i}", (FeatureStep(1, (f"hold_{i}",), name),)))
        elif shape == "entry":
            reset = lattice_pick(spec)
            actions += [
                SymbolicAction(f"enter_{i}", "press", GoTo(((name, reset),))),
                SymbolicAction(f"up_{i}", "press", NeighborForward()),
                SymbolicAction(f"down_{i}", "press", NeighborBackward()),
            ]
            features.append(
                Feature(
                    f"feature_{i}",
                    (
                        FeatureStep(1, (f"enter_{i}",), None, ((name, reset),)),
                        FeatureStep(2, (f"up_{i}", f"down_{i}"), name),
                    ),
                )
            )
        else:
            names = [f"up_{i}"]
            actions.append(SymbolicAction(f"up_{i}", "turn", NeighborForward(name)))
            if shape == "both":
                names.append(f"down_{i}")
                actions.append(SymbolicAction(f"down_{i}", "turn", NeighborBackward(name)))
            features.append(Feature(f"feature_{i}", (FeatureStep(1, tuple(names), name),)))

    if rng.random() < 0.3:
        variables.append(VariableState("cook_time", TimeSpec((("00:00:00", "00:10:00", 1),)), "00:00:00"))
        variables.append(VariableState("keypad", InputBufferSpec(rng.choice([4, 6])), ""))
        digits = tuple(SymbolicAction(f"digit_{d}", "press", Digit(d)) for d in range(10))
        actions += [SymbolicAction("press_cook", "press", GoTo((("cook_time", "00:00:00"),))), *digits]
        features.append(
            Feature(
                "set_cook_time",
                (
                    FeatureStep(1, ("press_cook",), None, (("cook_time", "00:00:00"),)),
                    FeatureStep(2, tuple(a.name for a in digits), "cook_time", (), "mmss"),
                ),
            )
        )

    program_map = None
    if rng.random() < 0.3:
        variables += [
            VariableState("program", DiscreteSpec(("rice", "soup")), "rice"),
            VariableState("rice_amount", DiscreteSpec(("1 cup", "2 cups", "3 cups")), "1 cup"),
            VariableState("soup_amount", DiscreteSpec(("small", "large")), "small"),
        ]
        actions += [
            SymbolicAction("press_program", "press", NeighborForward("program")),
            SymbolicAction("press_amount", "press", NeighborForward("amount")),
        ]
        features.append(
            Feature(
                "select_program",
                (FeatureStep(1, ("press_program",), "program"), FeatureStep(2, ("press_amount",), "amount")),
            )
        )
        program_map = ProgramMap("program", "amount", (("rice", "rice_amount"), ("soup", "soup_amount")))

    if rng.random() < 0.3:
        variables.append(VariableState("child_lock", DiscreteSpec(("unlocked", "locked")), "unlocked"))
        actions.append(SymbolicAction("hold_lock", "hold", NeighborForward("child_lock"), 3))
        features.append(Feature("child_lock", (FeatureStep(1, ("hold_lock",), "child_lock"),)))
        guards = Guards(power_variable=guards.power_variable, lock_variable="child_lock")

    return ApplianceModel(tuple(variables), tuple(actions), tuple(features), guards, program_map)


# ---------------------------------------------------------------------------
# one crafted defect per validator code


def _extend(model: ApplianceModel, *, variables=(), actions=(), features=(), **kw) -> ApplianceModel:
    from dataclasses import replace

    return replace(
        model,
        variables=model.variables + tuple(variables),
        actions=model.actions + tuple(actions),
        features=model.features + tuple(features),
        **kw,
    )


def keypad_model(reset: bool = True) -> ApplianceModel:
    digits = tuple(SymbolicAction(f"press_{d}", "press", Digit(d)) for d in range(10))
    return ApplianceModel(
        variables=(
            VariableState("cook_time", TimeSpec((("00:00:00", "00:30:00", 1),)), "00:00:00"),
            VariableState("keypad", InputBufferSpec(6), ""),
        ),
        actions=(SymbolicAction("press_time_cook", "press", GoTo((("cook_time", "00:00:00"),))),) + digits,
        features=(
            Feature(
                "set_cook_time",
                (
                    FeatureStep(1, ("press_time_cook",), None, (("cook_time", "00:00:00"),)),
                    FeatureStep(2, tuple(a.name for a in digits), "cook_time", (), "mmss"),
                ),
            ),
        ),
        input_reset_on_switch=reset,
    )


def crafted_validator_cases() -> dict[str, tuple[ApplianceModel, GoalState | None]]:
    """Code -> (model, goal) where the pair violates exactly that rule."""
    base = basic_dehumidifier()
    fan = "variable_fan_speed"
    light = SymbolicAction("press_light", "press", GoTo(()))
    return {
        # a step that neither binds a variable nor fixes any value
        "V1": (_extend(base, actions=[light], features=[Feature("light", (FeatureStep(1, ("press_light",)),))]), None),
        # a step naming an action that was never declared
        "V2": (_extend(base, features=[Feature("ghost", (FeatureStep(1, ("press_ghost",), fan),))]), None),
        # a declared action that no feature uses
        "V3": (_extend(base, actions=[SymbolicAction("press_x", "press", NeighborForward(fan))]), None),
        # a variable that no feature adjusts
        "V4": (_extend(base, variables=[VariableState("variable_light", DiscreteSpec(("on", "off")), "off")]), None),
        # two features with the same key sequence
        "V5": (
            _extend(base, features=[Feature("toggle_power", (FeatureStep(1, ("press_power_button",), "variable_power_on_off"),))]),
            None,
        ),
        # digit keys without any input buffer
        "V6": (
            _extend(
                base,
                actions=[SymbolicAction("press_1", "press", Digit(1))],
                features=[Feature("type_speed", (FeatureStep(1, ("press_1",), fan, (), "integer"),))],
            ),
            None,
        ),
        # buffer that keeps stale digits across other presses
        "V7": (keypad_model(reset=False), None),
        # a jump to a value outside the lattice
        "V8": (
            _extend(
                base,
                actions=[SymbolicAction("press_turbo", "press", GoTo(((fan, "turbo"),)))],
                features=[Feature("turbo", (FeatureStep(1, ("press_turbo",), fan),))],
            ),
            None,
        ),
        # a goal outside the lattice
        "V9": (base, goal(variable_fan_speed="turbo")),
    }
