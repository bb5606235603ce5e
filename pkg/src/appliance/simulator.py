"""Deterministic appliance simulator.

The transition function is pure (:func:`transition`); :class:`Simulator`
wraps it with mutable episode state and the textual feedback format.
"""

from __future__ import annotations

from dataclasses import dataclass
from decimal import Decimal
from typing import Protocol

from .errors import UnknownAction
from .model import (
    EMPTY_FEATURE,
    NULL_FEATURE,
    ApplianceModel,
    Digit,
    FeatureCursor,
    FeatureStep,
    GoTo,
    NeighborForward,
    Observation,
    Skill,
    is_neighbor,
)
from .values import canonical_member, shift_value, values_equal

LOCK_LINE = ("child_lock", "locked")
POWER_LINE = ("power", "off")


class Environment(Protocol):
    def reset(self) -> Observation: ...

    def step(self, action: str, times: int = 1, duration: Decimal | None = None) -> Observation: ...

    def render_display(self) -> str: ...


@dataclass(frozen=True)
class SimState:
    values: tuple[str, ...]
    cursor: FeatureCursor = FeatureCursor()


def initial_state(model: ApplianceModel) -> SimState:
    vals = [v.current for v in model.variables]
    if model.buffer_variable is not None:
        vals[model.var_index[model.buffer_variable]] = ""
    return SimState(tuple(vals), model.cursor)


def state_from_values(model: ApplianceModel, state: SimState, updates: dict[str, str]) -> SimState:
    vals = list(state.values)
    for name, value in updates.items():
        vals[model.var_index[name]] = value
    return SimState(tuple(vals), state.cursor)


def value_of(model: ApplianceModel, state: SimState, name: str) -> str:
    return state.values[model.var_index[name]]


# digit entry


def parse_digits(buffer: str, fmt: str) -> str | None:
    """Interpret a digit buffer; None when the digits do not form a value."""
    if fmt == "integer":
        return str(int(buffer)) if buffer else "0"
    if fmt == "mmss":
        if len(buffer) > 6:
            return None
        b = buffer.zfill(6)
        h, m, s = b[0:2], b[2:4], b[4:6]
    elif fmt == "hhmm":
        if len(buffer) > 4:
            return None
        b = buffer.zfill(4)
        h, m, s = b[0:2], b[2:4], "00"
    else:
        raise ValueError(f"unknown input format {fmt!r}")
    if int(m) > 59 or int(s) > 59:
        return None
    return f"{h}:{m}:{s}"


# transition function


def resolve_variable(model: ApplianceModel, values: tuple[str, ...] | list[str], name: str | None) -> str | None:
    """Map a program placeholder to the concrete variable selected right now."""
    pm = model.program_map
    if name is None or pm is None or name != pm.placeholder:
        return name
    return model.binding_for(values[model.var_index[pm.selector]])


def guard_block(model: ApplianceModel, values, action_name: str) -> tuple[str, str] | None:
    """The guard line if ``action_name`` is currently blocked, else None."""
    g = model.guards
    refs = model.action(action_name).referenced_variables()
    if g.lock_variable and g.lock_variable not in refs:
        if values_equal(values[model.var_index[g.lock_variable]], g.locked_value):
            return LOCK_LINE
    if g.power_variable and g.power_variable not in refs:
        if values_equal(values[model.var_index[g.power_variable]], g.power_off_value):
            return POWER_LINE
    return None


def update_cursor(model: ApplianceModel, cursor: FeatureCursor, action: str) -> tuple[FeatureCursor, FeatureStep | None]:
    """New cursor after ``action`` and the step entered, if any."""
    if cursor.feature != EMPTY_FEATURE and cursor.feature in model.feature_map:
        feat = model.feature(cursor.feature)
        here = feat.step(cursor.step)
        if action in here.actions and here.variable is not None:
            return cursor, None
        # advance, skipping adjustable steps that need no presses
        for step in feat.steps[cursor.step:]:
            if action in step.actions:
                return FeatureCursor(feat.name, step.index), step
            if step.variable is None:
                break
        if action in here.actions:
            return cursor, None
    for feat in model.features:
        if feat.name != NULL_FEATURE and feat.steps and action in feat.steps[0].actions:
            return FeatureCursor(feat.name, 1), feat.steps[0]
    return cursor, None


def _set(model: ApplianceModel, vals: list[str], name: str, value: str) -> None:
    member = canonical_member(model.variable(name).spec, value)
    if member is not None:
        vals[model.var_index[name]] = member


def transition(
    model: ApplianceModel, state: SimState, action_name: str, duration: Decimal | None = None
) -> tuple[SimState, tuple[str, str] | None]:
    """Apply one press of ``action_name``; returns the new state and any guard line."""
    act = model.action(action_name)
    if act.skill is Skill.HOLD:
        held = act.hold_duration if duration is None else Decimal(str(duration))
        if held < act.hold_duration:
            return state, None
    blocked = guard_block(model, state.values, action_name)
    if blocked is not None:
        return state, blocked

    vals = list(state.values)
    klass = act.klass
    buf = model.buffer_variable
    if buf is not None and model.input_reset_on_switch and not isinstance(klass, Digit):
        vals[model.var_index[buf]] = ""

    cursor, entered = update_cursor(model, state.cursor, action_name)
    if entered is not None:
        for name, value in entered.fixed_effects:
            _set(model, vals, name, value)
    step = None
    if cursor.feature != EMPTY_FEATURE:
        step = model.feature(cursor.feature).step(cursor.step)
    in_context = step is not None and action_name in step.actions

    if is_neighbor(klass):
        target = klass.variable if klass.variable else (step.variable if in_context else None)
        target = resolve_variable(model, vals, target)
        if target is not None:
            i = model.var_index[target]
            offset = 1 if isinstance(klass, NeighborForward) else -1
            vals[i] = shift_value(model.variables[i].spec, vals[i], offset)
    elif isinstance(klass, GoTo):
        if all(values_equal(vals[model.var_index[n]], v) for n, v in klass.guard):
            for name, value in klass.effects:
                _set(model, vals, name, value)
    elif isinstance(klass, Digit) and buf is not None:
        bi = model.var_index[buf]
        limit = model.variable(buf).spec.max_digits
        vals[bi] = (vals[bi] + str(klass.digit))[-limit:]
        if in_context and step.input_format and step.variable:
            target = resolve_variable(model, vals, step.variable)
            parsed = parse_digits(vals[bi], step.input_format)
            if target is not None and parsed is not None:
                _set(model, vals, target, parsed)

    return SimState(tuple(vals), cursor), None


def run_actions(model: ApplianceModel, state: SimState, actions) -> SimState:
    """Fold (action, times, duration) triples through the transition function."""
    for name, times, duration in actions:
        for _ in range(times):
            state, _ = transition(model, state, name, duration)
    return state


# environment


class Simulator:
    """Ground-truth environment driven by symbolic action names."""

    def __init__(self, model: ApplianceModel):
        self.model = model
        self.state = initial_state(model)

    def reset(self) -> Observation:
        self.state = initial_state(self.model)
        return Observation()

    def step(self, action: str, times: int = 1, duration: Decimal | None = None) -> Observation:
        if action not in self.model.action_map:
            raise UnknownAction(action)
        if times < 1:
            raise ValueError("times must be a positive integer")
        before = self.state.values
        guard_line = None
        for _ in range(times):
            self.state, blocked = transition(self.model, self.state, action, duration)
            guard_line = guard_line or blocked
        lines = [
            (v.name, after)
            for v, old, after in zip(self.model.variables, before, self.state.values)
            if old != after
        ]
        if guard_line is not None:
            lines.append(guard_line)
        return Observation.from_lines(lines)

    def render_display(self) -> str:
        return "".join(f"{v.name}={val}\n" for v, val in zip(self.model.variables, self.state.values))


def run_script(model: ApplianceModel, script: str) -> str:
    """Replay ``action[,times[,duration]]`` lines and concatenate raw feedback."""
    sim = Simulator(model)
    out = [sim.reset().raw]
    for lineno, line in enumerate(script.splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = [p.strip() for p in line.split(",")]
        try:
            times = int(parts[1]) if len(parts) > 1 and parts[1] else 1
            duration = Decimal(parts[2]) if len(parts) > 2 and parts[2] else None
        except Exception as exc:
            raise ValueError(f"script line {lineno}: {line!r}") from exc
        out.append(sim.step(parts[0], times, duration).raw)
    return "".join(out)
