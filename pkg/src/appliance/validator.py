"""Static checks over appliance models and goals.

Codes:
  V1  step adjusts nothing (no variable and no fixed effects)
  V2  step lists no actions, or an undeclared action
  V3  declared action never used by any feature
  V4  variable never adjusted by any feature
  V5  duplicated action sequences (warning)
  V6  digit keys declared on a model without an input buffer
  V7  input buffer is not reset when the user switches to another action
  V8  action, step and variable references disagree
  V9  goal is not fully specified or not reachable in the lattice
"""

from __future__ import annotations

from dataclasses import dataclass

from .model import (
    EMPTY_FEATURE,
    NULL_FEATURE,
    ApplianceModel,
    Digit,
    GoalState,
    GoTo,
    TaskPolicy,
    is_neighbor,
)
from .values import InputBufferSpec, LatticeUndefined, lattice_index, value_lattice

ERROR = "error"
WARNING = "warning"


@dataclass(frozen=True)
class Diagnostic:
    code: str
    severity: str
    subject: str
    message: str

    def as_dict(self) -> dict:
        return {"code": self.code, "severity": self.severity, "subject": self.subject, "message": self.message}


def errors_only(diags: list[Diagnostic]) -> list[Diagnostic]:
    return [d for d in diags if d.severity == ERROR]


def _in_lattice(model: ApplianceModel, var: str, value: str) -> bool:
    try:
        return lattice_index(model.variable(var).spec, value) is not None
    except LatticeUndefined:
        return False


def validate(model: ApplianceModel, goal: GoalState | None = None, policy: TaskPolicy | None = None) -> list[Diagnostic]:
    out: list[Diagnostic] = []

    def add(code: str, subject: str, message: str, severity: str = ERROR) -> None:
        out.append(Diagnostic(code, severity, subject, message))

    declared_vars = set(model.var_index)
    pm = model.program_map
    placeholder = pm.placeholder if pm else None
    step_var_names = declared_vars | ({placeholder} if placeholder else set())
    has_buffer = model.buffer_variable is not None

    # V8: references held by actions themselves
    for a in model.actions:
        subj = f"actions.{a.name}"
        k = a.klass
        if is_neighbor(k) and k.variable is not None and k.variable not in step_var_names:
            add("V8", subj, f"adjusts undeclared variable {k.variable!r}")
        if isinstance(k, GoTo):
            for var, val in k.effects + k.guard:
                if var not in declared_vars:
                    add("V8", subj, f"references undeclared variable {var!r}")
                elif not _in_lattice(model, var, val):
                    add("V8", subj, f"value {val!r} is outside the lattice of {var!r}")
        if isinstance(k, Digit) and not has_buffer:
            add("V6", subj, "digit key on a model without an input buffer")

    if has_buffer and not model.input_reset_on_switch:
        add("V7", f"variables.{model.buffer_variable}", "input buffer must reset when another action is pressed")

    used_actions: set[str] = set()
    covered: set[str] = set()
    expansions: dict[tuple, str] = {}

    for feat in model.features:
        is_null = feat.name == NULL_FEATURE
        if not feat.steps and not is_null:
            add("V2", f"features.{feat.name}", "feature has no steps")
        adjusted: list[str] = []
        for step in feat.steps:
            subj = f"features.{feat.name}.steps[{step.index}]"
            if not step.actions and not is_null:
                add("V2", subj, "step lists no actions")
            for name in step.actions:
                if name not in model.action_map:
                    add("V2", subj, f"undeclared action {name!r}")
                else:
                    used_actions.add(name)
            if is_null:
                continue
            if step.variable is None and not step.fixed_effects:
                add("V1", subj, "step adjusts no variable and has no fixed effects")
            if step.variable is not None:
                if step.variable not in step_var_names:
                    add("V8", subj, f"step variable {step.variable!r} is undeclared")
                elif step.variable in declared_vars and isinstance(model.variable(step.variable).spec, InputBufferSpec):
                    add("V8", subj, "a step cannot adjust the input buffer directly")
                adjusted.append(step.variable)
            for var, val in step.fixed_effects:
                if var not in declared_vars:
                    add("V8", subj, f"fixed effect on undeclared variable {var!r}")
                elif not _in_lattice(model, var, val):
                    add("V8", subj, f"fixed effect value {val!r} is outside the lattice of {var!r}")
            allowed = {step.variable} | {v for v, _ in step.fixed_effects}
            if pm is not None and step.variable == placeholder:
                allowed |= {v for _, v in pm.bindings}
            has_digit = False
            for name in step.actions:
                act = model.action_map.get(name)
                if act is None:
                    continue
                k = act.klass
                if is_neighbor(k):
                    if step.variable is None:
                        add("V8", subj, f"neighbor action {name!r} in a step without a variable")
                    elif k.variable is not None and k.variable != step.variable:
                        add("V8", subj, f"{name!r} adjusts {k.variable!r}, not the step variable {step.variable!r}")
                elif isinstance(k, GoTo):
                    stray = [v for v, _ in k.effects if v not in allowed]
                    if stray:
                        add("V8", subj, f"{name!r} also sets {stray} outside this step")
                elif isinstance(k, Digit):
                    has_digit = True
            if has_digit and step.variable is not None and step.input_format is None:
                add("V8", subj, "digit entry step needs an input_format")
            if step.input_format is not None and step.variable is None:
                add("V8", subj, "input_format given without a variable")
        if not is_null:
            covered |= model.feature_variables(feat.name)
            key = tuple(tuple(sorted(s.actions)) for s in feat.steps)
            if key in expansions:
                add("V5", f"features.{feat.name}", f"same action sequence as {expansions[key]!r}", WARNING)
            else:
                expansions[key] = feat.name
            dup = sorted({v for v in adjusted if adjusted.count(v) > 1})
            if dup:
                add("V5", f"features.{feat.name}", f"adjusts {dup} in more than one step", WARNING)

    for a in model.actions:
        if a.name not in used_actions:
            add("V3", f"actions.{a.name}", "action does not appear in any feature")

    for v in model.variables:
        if v.name not in covered:
            add("V4", f"variables.{v.name}", "no feature adjusts this variable")

    # guards, program map and cursor also must point at real things
    g = model.guards
    for role, var, val in (("power", g.power_variable, g.power_off_value), ("lock", g.lock_variable, g.locked_value)):
        if var is None:
            continue
        if var not in declared_vars:
            add("V8", f"guards.{role}", f"guard variable {var!r} is undeclared")
        elif not _in_lattice(model, var, val):
            add("V8", f"guards.{role}", f"guard value {val!r} is outside the lattice of {var!r}")
    if pm is not None:
        if pm.selector not in declared_vars:
            add("V8", "program_map", f"selector {pm.selector!r} is undeclared")
        else:
            try:
                lat = value_lattice(model.variable(pm.selector).spec)
            except LatticeUndefined:
                lat = ()
            for value in lat:
                if model.binding_for(value) is None:
                    add("V8", "program_map", f"no binding for selector value {value!r}")
            for _, var in pm.bindings:
                if var not in declared_vars:
                    add("V8", "program_map", f"binding targets undeclared variable {var!r}")
        if pm.placeholder in declared_vars:
            add("V8", "program_map", "placeholder name collides with a declared variable")
    c = model.cursor
    if c.feature != EMPTY_FEATURE:
        f = model.feature_map.get(c.feature)
        if f is None or not 1 <= c.step <= len(f.steps):
            add("V8", "cursor", f"cursor {c} does not point at a feature step")
    elif c.step != 1:
        add("V8", "cursor", "the empty cursor must sit at step 1")

    if goal is not None:
        out.extend(validate_goal(model, goal, policy))
    return sorted(out, key=lambda d: (d.code, d.subject, d.message))


def validate_goal(model: ApplianceModel, goal: GoalState, policy: TaskPolicy | None = None) -> list[Diagnostic]:
    """V9: every target is a member of its (possibly overridden) lattice."""
    out: list[Diagnostic] = []

    def add(subject: str, message: str) -> None:
        out.append(Diagnostic("V9", ERROR, subject, message))

    if not goal.assignments:
        add("goal", "goal assigns no variable")
    for var, target in goal.assignments:
        subj = f"goal.{var}"
        if var not in model.var_index:
            add(subj, "goal names an undeclared variable")
            continue
        spec = goal.overrides.get(var, model.variable(var).spec)
        try:
            ok = lattice_index(spec, target) is not None
        except LatticeUndefined:
            ok = False
        if not ok:
            add(subj, f"target {target!r} is not a reachable value")
    if policy is not None:
        for f in policy.features:
            if f not in model.feature_map:
                add(f"policy.{f}", "policy names an undeclared feature")
        reach = set()
        for f in policy.features:
            if f in model.feature_map:
                reach |= model.feature_variables(f)
        targets = goal.targets
        for var in policy.changing_variables:
            if var not in targets and var not in goal.ignored:
                add(f"policy.{var}", "changing variable is neither assigned nor ignored")
            if var not in reach:
                add(f"policy.{var}", "no listed feature adjusts this variable")
    return sorted(out, key=lambda d: (d.code, d.subject, d.message))
