"""Compile goal assignments into low-level action sequences.

Each feature (macro action) is compiled independently from a believed state:
adjustable steps get the cheapest repeat count on their lattice, digit steps
get the shortest key sequence, and confirm-style steps are only pressed when
a later step actually needs them.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from decimal import Decimal

from .errors import (
    GoalVariableNotInFeature,
    NoDigitEncoding,
    PlanningError,
    PredictionMismatch,
    TargetUnreachable,
)
from .model import (
    ApplianceModel,
    Digit,
    FeatureCursor,
    GoalState,
    GoTo,
    NeighborBackward,
    NeighborForward,
    TaskPolicy,
)
from .simulator import SimState, initial_state, parse_digits, resolve_variable, run_actions
from .values import (
    VariableSpec,
    is_cyclic,
    lattice_index,
    normalize_value,
    parse_clock,
    value_lattice,
    values_equal,
)

Emission = tuple[str, int, Decimal | None]


@dataclass(frozen=True)
class CompiledMacro:
    feature: str
    actions: tuple[Emission, ...]
    expected: tuple[tuple[str, str], ...]

    @property
    def press_count(self) -> int:
        return sum(n for _, n, _ in self.actions)


@dataclass(frozen=True)
class Plan:
    macros: tuple[CompiledMacro, ...]

    @property
    def press_count(self) -> int:
        return sum(m.press_count for m in self.macros)


# ---------------------------------------------------------------------------
# single variable


def compile_adjustment(
    spec: VariableSpec, current: str, target: str, fwd: str | None, bwd: str | None
) -> tuple[str, int]:
    """Cheapest (action, repeat count) moving ``current`` to ``target``."""
    c = lattice_index(spec, current)
    t = lattice_index(spec, target)
    if c is None or t is None:
        raise TargetUnreachable(f"{current!r} or {target!r} is not in the lattice")
    if c == t:
        return fwd or bwd or "", 0
    if fwd is None and bwd is None:
        raise TargetUnreachable("no neighbor action available")
    n = len(value_lattice(spec))
    if is_cyclic(spec):
        costs = {"fwd": (t - c) % n, "bwd": (c - t) % n}
    else:
        costs = {"fwd": t - c if t >= c else None, "bwd": c - t if c >= t else None}
    options = []
    if fwd is not None and costs["fwd"] is not None:
        options.append((costs["fwd"], 0, fwd))
    if bwd is not None and costs["bwd"] is not None:
        options.append((costs["bwd"], 1, bwd))
    if not options:
        raise TargetUnreachable(f"{target!r} lies beyond the saturating end from {current!r}")
    cost, _, action = min(options)
    return action, cost


def compile_digits(target: str, input_format: str, max_digits: int = 6) -> list[str]:
    """Shortest digit string whose parse equals ``target``."""
    norm = normalize_value(target)
    try:
        if input_format == "integer":
            if not norm.isdigit():
                raise NoDigitEncoding(f"{target!r} is not a whole number")
            raw = norm.lstrip("0")
        else:
            seconds = parse_clock(norm)
            h, rem = divmod(seconds, 3600)
            m, s = divmod(rem, 60)
            if h > 99:
                raise NoDigitEncoding(f"{target!r} has too many hours")
            if input_format == "mmss":
                raw = f"{h:02d}{m:02d}{s:02d}".lstrip("0")
            elif input_format == "hhmm":
                if s:
                    raise NoDigitEncoding(f"{target!r} has seconds, which hh:mm entry cannot express")
                raw = f"{h:02d}{m:02d}".lstrip("0")
            else:
                raise NoDigitEncoding(f"unknown input format {input_format!r}")
    except NoDigitEncoding:
        raise
    except Exception as exc:
        raise NoDigitEncoding(f"{target!r} cannot be typed as {input_format}") from exc
    if len(raw) > max_digits:
        raise NoDigitEncoding(f"{target!r} needs {len(raw)} digits, the buffer holds {max_digits}")
    parsed = parse_digits(raw, input_format)
    if parsed is None or not values_equal(parsed, target):
        raise NoDigitEncoding(f"no digit string parses to {target!r}")
    return list(raw)


# ---------------------------------------------------------------------------
# macros


def apply_overrides(model: ApplianceModel, goal: GoalState) -> ApplianceModel:
    """Install the goal's range overrides, keeping current values when possible."""
    for var, spec in goal.range_overrides:
        old = model.variable(var)
        current = old.current
        if lattice_index(spec, current) is None:
            current = value_lattice(spec)[0]
        model = model.with_variable(replace(old, spec=spec, current=current))
    return model


def _duration(model: ApplianceModel, action: str) -> Decimal | None:
    return model.action(action).hold_duration


def _merge(emissions: list[Emission]) -> list[Emission]:
    out: list[Emission] = []
    for e in emissions:
        if out and out[-1][0] == e[0] and out[-1][2] == e[2]:
            out[-1] = (e[0], out[-1][1] + e[1], e[2])
        elif e[1] > 0:
            out.append(e)
    return out


def _step_adjustment(model: ApplianceModel, step, var: str, cur: str, target: str, values) -> list[Emission]:
    spec = model.variable(var).spec
    if step.input_format is not None:
        digit_actions = {}
        for a in step.actions:
            k = model.action(a).klass
            if isinstance(k, Digit):
                digit_actions.setdefault(str(k.digit), a)
        buf = model.buffer_variable
        limit = model.variable(buf).spec.max_digits if buf else 6
        digits = compile_digits(target, step.input_format, limit) or ["0"]
        missing = [d for d in digits if d not in digit_actions]
        if missing:
            raise NoDigitEncoding(f"step has no key for digit(s) {missing}")
        return _merge([(digit_actions[d], 1, None) for d in digits])
    fwd = bwd = None
    gotos = []
    for a in step.actions:
        k = model.action(a).klass
        if isinstance(k, NeighborForward) and fwd is None:
            fwd = a
        elif isinstance(k, NeighborBackward) and bwd is None:
            bwd = a
        elif isinstance(k, GoTo):
            gotos.append((a, k))
    if fwd or bwd:
        action, n = compile_adjustment(spec, cur, target, fwd, bwd)
        return [(action, n, _duration(model, action))] if n else []
    for a, k in gotos:
        sets = any(v == var and values_equal(val, target) for v, val in k.effects)
        guard_ok = all(values_equal(values[model.var_index[g]], gv) for g, gv in k.guard)
        if sets and guard_ok:
            return [(a, 1, _duration(model, a))]
    raise TargetUnreachable(f"step {step.index} has no action that sets {var} to {target!r}")


def _with_entry_effects(model: ApplianceModel, state: SimState, feature: str, step) -> list[str]:
    vals = list(state.values)
    if state.cursor != FeatureCursor(feature, step.index):
        for v, val in step.fixed_effects:
            vals[model.var_index[v]] = val
    return vals


def compile_macro(
    belief: ApplianceModel, feature: str, goal: GoalState, start: SimState | None = None
) -> CompiledMacro:
    """Emissions for one feature plus the goal values it is predicted to reach."""
    belief = apply_overrides(belief, goal)
    feat = belief.feature(feature)
    state0 = start if start is not None else initial_state(belief)
    targets = goal.targets
    touched = belief.feature_variables(feature) & targets.keys()
    if not touched:
        if not any(s.fixed_effects for s in feat.steps):
            raise GoalVariableNotInFeature(f"goal binds no variable adjusted by {feature!r}")
        return CompiledMacro(feature, (), ())

    state = state0
    emitted: list[Emission] = []
    pending: list[Emission] = []
    handled: set[str] = set()
    for step in feat.steps:
        probe = run_actions(belief, state, pending)
        vals = _with_entry_effects(belief, probe, feature, step)
        var = resolve_variable(belief, vals, step.variable)
        needed: list[Emission] = []
        if var is not None and var in targets:
            handled.add(var)
            cur = vals[belief.var_index[var]]
            if not values_equal(cur, targets[var]):
                needed = _step_adjustment(belief, step, var, cur, targets[var], vals)
        for v, val in step.fixed_effects:
            if v in targets and values_equal(val, targets[v]):
                handled.add(v)
                if not needed and not values_equal(probe.values[belief.var_index[v]], targets[v]):
                    needed = [(step.actions[0], 1, _duration(belief, step.actions[0]))]
        if needed:
            emitted += pending + needed
            state = run_actions(belief, state, pending + needed)
            pending = []
        elif step.variable is None and step.actions:
            pending.append((step.actions[0], 1, _duration(belief, step.actions[0])))

    emitted = _merge(emitted)
    final = run_actions(belief, state0, emitted)
    expected = []
    for v in belief.variables:
        if v.name in handled:
            got = final.values[belief.var_index[v.name]]
            if not values_equal(got, targets[v.name]):
                raise PredictionMismatch(
                    f"{feature}: compiled presses leave {v.name}={got!r} instead of {targets[v.name]!r}"
                )
            expected.append((v.name, got))
    return CompiledMacro(feature, tuple(emitted), tuple(expected))


def compile_plan(
    belief: ApplianceModel, policy: TaskPolicy, goal: GoalState, start: SimState | None = None
) -> Plan:
    """One compiled macro per policy feature; shared goal variables stay with the last writer."""
    if not goal.assignments:
        return Plan(())
    belief = apply_overrides(belief, goal)
    state = start if start is not None else initial_state(belief)
    macros = []
    for name in policy.features:
        try:
            macro = compile_macro(belief, name, goal, state)
        except PlanningError as exc:
            exc.feature = name
            raise
        macros.append(macro)
        state = run_actions(belief, state, macro.actions)
    owner: dict[str, int] = {}
    for i, m in enumerate(macros):
        for v, _ in m.expected:
            owner[v] = i
    macros = [
        replace(m, expected=tuple((v, val) for v, val in m.expected if owner[v] == i)) for i, m in enumerate(macros)
    ]
    return Plan(tuple(macros))


__all__ = [
    "CompiledMacro",
    "Plan",
    "apply_overrides",
    "compile_adjustment",
    "compile_digits",
    "compile_macro",
    "compile_plan",
]
