"""Domain types for appliance models, goals, policies and traces.

Model objects are frozen; running state lives in :class:`SimState` and
``dataclasses.replace`` produces modified models.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace
from decimal import Decimal
from functools import cached_property
from typing import Union

from .errors import InvalidSpec, UnknownAction, UnknownVariable
from .values import (
    InputBufferSpec,
    VariableSpec,
    lattice_index,
    value_lattice,
    values_equal,
)

EMPTY_FEATURE = "empty"
NULL_FEATURE = "null"
INPUT_FORMATS = ("integer", "mmss", "hhmm")


class Skill(str, enum.Enum):
    PRESS = "press"
    HOLD = "hold"
    TURN = "turn"


@dataclass(frozen=True)
class VariableState:
    name: str
    spec: VariableSpec
    current: str

    def __post_init__(self) -> None:
        if isinstance(self.spec, InputBufferSpec):
            if not (self.current == "" or self.current.isdigit()):
                raise InvalidSpec(f"{self.name}: buffer must hold digits, got {self.current!r}")
            if len(self.current) > self.spec.max_digits:
                raise InvalidSpec(f"{self.name}: buffer longer than {self.spec.max_digits}")
            return
        i = lattice_index(self.spec, self.current)
        if i is None:
            raise InvalidSpec(f"{self.name}: current value {self.current!r} is not in its lattice")
        # keep the lattice spelling so observations are stable
        object.__setattr__(self, "current", value_lattice(self.spec)[i])


# action classes


@dataclass(frozen=True)
class NeighborForward:
    """Moves a variable to its lattice successor.

    ``variable=None`` means the action adjusts whatever variable the current
    feature step is bound to (a generic "+" key).
    """

    variable: str | None = None


@dataclass(frozen=True)
class NeighborBackward:
    variable: str | None = None


@dataclass(frozen=True)
class GoTo:
    """Sets variables to fixed values while every ``guard`` equality holds."""

    effects: tuple[tuple[str, str], ...]
    guard: tuple[tuple[str, str], ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "effects", tuple(tuple(e) for e in self.effects))
        object.__setattr__(self, "guard", tuple(tuple(g) for g in self.guard))


@dataclass(frozen=True)
class Digit:
    digit: int

    def __post_init__(self) -> None:
        if not (isinstance(self.digit, int) and 0 <= self.digit <= 9):
            raise InvalidSpec(f"digit must be 0-9: {self.digit!r}")


ActionClass = Union[NeighborForward, NeighborBackward, GoTo, Digit]


def is_neighbor(klass: ActionClass) -> bool:
    return isinstance(klass, (NeighborForward, NeighborBackward))


@dataclass(frozen=True)
class SymbolicAction:
    name: str
    skill: Skill
    klass: ActionClass
    hold_duration: Decimal | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "skill", Skill(self.skill))
        if self.hold_duration is not None:
            object.__setattr__(self, "hold_duration", Decimal(str(self.hold_duration)))
        if (self.skill is Skill.HOLD) != (self.hold_duration is not None):
            raise InvalidSpec(f"{self.name}: hold_duration is required exactly for hold actions")

    def referenced_variables(self) -> set[str]:
        k = self.klass
        if is_neighbor(k):
            return {k.variable} if k.variable else set()
        if isinstance(k, GoTo):
            return {v for v, _ in k.effects} | {v for v, _ in k.guard}
        return set()


@dataclass(frozen=True)
class GroundedAction:
    """A symbolic action bound to a bounding box on the control panel."""

    action: str
    bbox: tuple[float, float, float, float]
    skill: Skill

    def __post_init__(self) -> None:
        object.__setattr__(self, "skill", Skill(self.skill))
        if len(self.bbox) != 4 or self.bbox[2] <= 0 or self.bbox[3] <= 0:
            raise InvalidSpec(f"bbox needs positive width and height: {self.bbox}")


# features


@dataclass(frozen=True)
class FeatureStep:
    index: int
    actions: tuple[str, ...]
    variable: str | None = None
    fixed_effects: tuple[tuple[str, str], ...] = ()
    input_format: str | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "actions", tuple(self.actions))
        object.__setattr__(self, "fixed_effects", tuple(tuple(e) for e in self.fixed_effects))
        if self.input_format is not None and self.input_format not in INPUT_FORMATS:
            raise InvalidSpec(f"unsupported input format {self.input_format!r}")

    @property
    def requires_input_parse(self) -> bool:
        return self.input_format is not None


@dataclass(frozen=True)
class Feature:
    name: str
    steps: tuple[FeatureStep, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "steps", tuple(self.steps))
        if [s.index for s in self.steps] != list(range(1, len(self.steps) + 1)):
            raise InvalidSpec(f"feature {self.name}: step indices must be 1..n")

    def step(self, index: int) -> FeatureStep:
        return self.steps[index - 1]


@dataclass(frozen=True)
class FeatureCursor:
    feature: str = EMPTY_FEATURE
    step: int = 1


@dataclass(frozen=True)
class Guards:
    power_variable: str | None = None
    power_off_value: str = "off"
    lock_variable: str | None = None
    locked_value: str = "locked"


@dataclass(frozen=True)
class ProgramMap:
    """Routes a placeholder step variable to a concrete variable per program."""

    selector: str
    placeholder: str
    bindings: tuple[tuple[str, str], ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "bindings", tuple(tuple(b) for b in self.bindings))


@dataclass(frozen=True)
class ApplianceModel:
    variables: tuple[VariableState, ...]
    actions: tuple[SymbolicAction, ...]
    features: tuple[Feature, ...]
    guards: Guards = field(default_factory=Guards)
    program_map: ProgramMap | None = None
    input_reset_on_switch: bool = True
    cursor: FeatureCursor = field(default_factory=FeatureCursor)

    def __post_init__(self) -> None:
        for name in ("variables", "actions", "features"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        for kind, items in (("variable", self.variables), ("action", self.actions), ("feature", self.features)):
            names = [x.name for x in items]
            if len(set(names)) != len(names):
                raise InvalidSpec(f"duplicate {kind} names")

    # lookups are derived from the tuples and cached on the instance

    @cached_property
    def var_index(self) -> dict[str, int]:
        return {v.name: i for i, v in enumerate(self.variables)}

    @cached_property
    def action_map(self) -> dict[str, SymbolicAction]:
        return {a.name: a for a in self.actions}

    @cached_property
    def feature_map(self) -> dict[str, Feature]:
        return {f.name: f for f in self.features}

    @cached_property
    def buffer_variable(self) -> str | None:
        for v in self.variables:
            if isinstance(v.spec, InputBufferSpec):
                return v.name
        return None

    def variable(self, name: str) -> VariableState:
        try:
            return self.variables[self.var_index[name]]
        except KeyError:
            raise UnknownVariable(name) from None

    def action(self, name: str) -> SymbolicAction:
        try:
            return self.action_map[name]
        except KeyError:
            raise UnknownAction(name) from None

    def feature(self, name: str) -> Feature:
        return self.feature_map[name]

    def with_variable(self, state: VariableState) -> "ApplianceModel":
        vs = list(self.variables)
        vs[self.var_index[state.name]] = state
        return replace(self, variables=tuple(vs))

    def with_actions(self, actions: tuple[SymbolicAction, ...]) -> "ApplianceModel":
        return replace(self, actions=tuple(actions))

    def feature_variables(self, name: str) -> set[str]:
        """Variables that some press within the feature can change."""
        out: set[str] = set()
        pm = self.program_map
        for step in self.feature(name).steps:
            if step.variable is not None:
                if pm is not None and step.variable == pm.placeholder:
                    out.update(v for _, v in pm.bindings)
                else:
                    out.add(step.variable)
            out.update(v for v, _ in step.fixed_effects)
            for a in step.actions:
                act = self.action_map.get(a)
                if act is None:
                    continue
                k = act.klass
                if isinstance(k, GoTo):
                    out.update(v for v, _ in k.effects)
                elif is_neighbor(k) and k.variable:
                    if pm is not None and k.variable == pm.placeholder:
                        out.update(v for _, v in pm.bindings)
                    else:
                        out.add(k.variable)
                elif isinstance(k, Digit) and self.buffer_variable:
                    out.add(self.buffer_variable)
        return out

    def binding_for(self, selector_value: str) -> str | None:
        pm = self.program_map
        if pm is None:
            return None
        for sel, var in pm.bindings:
            if values_equal(sel, selector_value):
                return var
        return None


# goals, policies, traces


@dataclass(frozen=True)
class GoalState:
    assignments: tuple[tuple[str, str], ...]
    range_overrides: tuple[tuple[str, VariableSpec], ...] = ()
    ignored: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        # canonical ordering keeps structural equality independent of input order
        object.__setattr__(self, "assignments", tuple(sorted(tuple(a) for a in self.assignments)))
        object.__setattr__(
            self, "range_overrides", tuple(sorted((tuple(a) for a in self.range_overrides), key=lambda a: a[0]))
        )
        object.__setattr__(self, "ignored", tuple(sorted(self.ignored)))

    @cached_property
    def overrides(self) -> dict[str, VariableSpec]:
        return dict(self.range_overrides)

    @cached_property
    def targets(self) -> dict[str, str]:
        return dict(self.assignments)


@dataclass(frozen=True)
class TaskPolicy:
    features: tuple[str, ...]
    changing_variables: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "features", tuple(self.features))
        object.__setattr__(self, "changing_variables", tuple(self.changing_variables))


@dataclass(frozen=True)
class Observation:
    lines: tuple[tuple[str, str], ...] = ()
    raw: str = ""

    @classmethod
    def from_lines(cls, lines) -> "Observation":
        lines = tuple((n, v) for n, v in lines)
        return cls(lines, "".join(f"{n}={v}\n" for n, v in lines))

    @classmethod
    def from_raw(cls, raw: str) -> "Observation":
        lines = []
        for line in raw.splitlines():
            if "=" in line:
                n, v = line.split("=", 1)
                lines.append((n, v))
        return cls(tuple(lines), raw)


class Phase(str, enum.Enum):
    PLAN = "plan"
    EXPLORE = "explore"


@dataclass(frozen=True)
class TraceRecord:
    step_index: int
    action: str
    times: int
    phase: Phase
    observation: Observation
    duration: Decimal | None = None


@dataclass
class ExecutionTrace:
    records: list[TraceRecord] = field(default_factory=list)

    def append(self, action: str, times: int, phase: Phase, obs: Observation, duration=None) -> None:
        idx = self.records[-1].step_index + 1 if self.records else 1
        self.records.append(TraceRecord(idx, action, times, Phase(phase), obs, duration))
