"""Closed-loop execution with model repair.

The executor plays compiled macros against an environment, reads the
textual feedback, and when a neighbor-adjusted variable lands on the wrong
value it presses that variable's key around its whole cycle, rebuilds the
variable's spec from what it saw, and replans.
"""

from __future__ import annotations

import difflib
import re
from dataclasses import dataclass, field, replace
from decimal import Decimal
from typing import Callable

from .compiler import CompiledMacro, apply_overrides, compile_macro, compile_plan, Plan
from .errors import (
    ApplianceError,
    ExplorationBlocked,
    ExplorationCapExceeded,
    GoalInfeasible,
    InconsistentSequence,
    InvalidSpec,
    PlanningError,
    Unparseable,
)
from .model import (
    ApplianceModel,
    ExecutionTrace,
    FeatureCursor,
    GoalState,
    NeighborBackward,
    NeighborForward,
    Observation,
    Phase,
    TaskPolicy,
    VariableState,
    is_neighbor,
)
from .simulator import (
    LOCK_LINE,
    POWER_LINE,
    Environment,
    SimState,
    initial_state,
    resolve_variable,
    run_actions,
    state_from_values,
)
from .values import (
    ContinuousSpec,
    DiscreteSpec,
    Segment,
    TimeSpec,
    VariableSpec,
    canonical_member,
    lattice_index,
    normalize_value,
    parse_clock,
    value_lattice,
    values_equal,
)

EXPLORATION_CAP = 256
MAX_REPAIRS_PER_VARIABLE = 2


@dataclass(frozen=True)
class RepairRecord:
    variable: str
    observed_sequence: tuple[str, ...]
    old_spec: VariableSpec
    new_spec: VariableSpec
    swapped_directions: bool = False


@dataclass
class EpisodeResult:
    success: bool
    reasoning_steps: int
    execution_steps: int
    trace: ExecutionTrace
    repairs: list[RepairRecord] = field(default_factory=list)
    unique_macros: int = 0
    failure: str | None = None


@dataclass(frozen=True)
class Matched:
    pass


@dataclass(frozen=True)
class Mismatch:
    variable: str
    expected: str
    observed: str | None


# ---------------------------------------------------------------------------
# reading feedback


def _squash(name: str) -> str:
    return re.sub(r"[^a-z0-9]+", "_", name.lower()).strip("_")


def parse_feedback(obs: Observation, variable: str) -> str:
    """Value reported for ``variable``: exact line name first, else a unique fuzzy match."""
    exact = [v for n, v in obs.lines if n == variable]
    if exact:
        return exact[-1]
    want = _squash(variable)
    names = {n for n, _ in obs.lines if want and (want in _squash(n) or _squash(n) in want) and _squash(n)}
    if len(names) != 1:
        raise Unparseable(f"{len(names)} candidate line(s) for {variable!r}")
    (name,) = names
    return [v for n, v in obs.lines if n == name][-1]


def check_macro(expected, observed: dict[str, str | None]) -> Matched | Mismatch:
    for var, value in expected:
        got = observed.get(var)
        if got is None or not values_equal(value, got):
            return Mismatch(var, value, got)
    return Matched()


def _guard_hit(obs: Observation, variable: str) -> bool:
    return any(line in (LOCK_LINE, POWER_LINE) and line[0] != variable for line in obs.lines)


# ---------------------------------------------------------------------------
# exploration and inference


def explore_cycle(
    env: Environment,
    action: str,
    seed: str,
    variable: str | None = None,
    *,
    cap: int = EXPLORATION_CAP,
    duration: Decimal | None = None,
    on_step: Callable[[str, Observation], None] | None = None,
) -> list[str]:
    """Press ``action`` until a value repeats; returns [seed, v1, ..., repeated]."""
    variable = variable or ""
    seq = [seed]
    while True:
        if len(seq) > cap:
            raise ExplorationCapExceeded(f"no repeat within {cap} presses of {action!r}")
        obs = env.step(action, 1, duration)
        if on_step is not None:
            on_step(action, obs)
        if _guard_hit(obs, variable):
            raise ExplorationBlocked(f"{action!r} is blocked: {obs.raw.strip()}")
        try:
            value = parse_feedback(obs, variable)
        except Unparseable:
            value = parse_feedback(Observation.from_raw(env.render_display()), variable)
        seen = any(values_equal(value, v) for v in seq)
        seq.append(value)
        if seen:
            return seq


_NUM_RE = re.compile(r"-?\d+(\.\d+)?")
_CLOCK_RE = re.compile(r"\d{2,}:\d{2}:\d{2}")


def _segments(points: list[Decimal]) -> list[Segment]:
    if len(points) == 1:
        return [Segment(points[0], points[0], 1)]
    segs = []
    start, step = points[0], points[1] - points[0]
    for a, b in zip(points[1:], points[2:]):
        if b - a != step:
            segs.append(Segment(start, a, step))
            start, step = a, b - a
    segs.append(Segment(start, points[-1], step))
    return segs


def _is_rotation(seq: list, of: list) -> bool:
    n = len(of)
    return len(seq) == n and any(seq == of[i:] + of[:i] for i in range(n))


def infer_spec(sequence, old_spec: VariableSpec | None = None) -> VariableSpec:
    """Rebuild a spec from an observed neighbor walk.

    A walk ending on its first value is a cycle; one ending on a repeat of
    its previous value saturates.  Numeric walks that visit values in sorted
    (or reverse sorted) order become ascending numeric specs; other walks keep
    the observed order as a discrete spec.
    """
    seq = [normalize_value(v) for v in sequence]
    if len(seq) < 2:
        raise InconsistentSequence("need at least two observations")
    if seq[-1] == seq[-2]:
        cyclic, body = False, list(sequence[:-1])
    elif seq[-1] == seq[0]:
        cyclic, body = True, list(sequence[:-1])
    else:
        raise InconsistentSequence(f"walk does not close: {list(sequence)}")
    norm = [normalize_value(v) for v in body]
    if len(set(norm)) != len(norm):
        raise InconsistentSequence(f"values repeat before the walk closes: {list(sequence)}")

    kind = None
    if all(_CLOCK_RE.fullmatch(v) for v in norm):
        keys = [Decimal(parse_clock(v)) for v in norm]
        kind = "time"
    elif all(_NUM_RE.fullmatch(v) for v in norm):
        keys = [Decimal(v) for v in norm]
        kind = "number"
    if kind is not None:
        asc = sorted(keys)
        ordered = _is_rotation(keys, asc) or _is_rotation(keys, asc[::-1]) if cyclic else keys in (asc, asc[::-1])
        if ordered:
            segs = _segments(asc)
            if kind == "time":
                return TimeSpec(tuple(segs), cyclic)
            unit = old_spec.unit if isinstance(old_spec, ContinuousSpec) else ""
            return ContinuousSpec(tuple(segs), unit, cyclic)
    return _anchored(DiscreteSpec(tuple(body), cyclic), old_spec)


def _anchored(spec: DiscreteSpec, old_spec: VariableSpec | None) -> DiscreteSpec:
    """Rotate a cyclic order to start where the old spec started (same cycle)."""
    if not spec.cyclic or not isinstance(old_spec, DiscreteSpec):
        return spec
    norm = [normalize_value(v) for v in spec.ordered_values]
    anchor = normalize_value(old_spec.ordered_values[0])
    if anchor not in norm:
        return spec
    i = norm.index(anchor)
    vals = spec.ordered_values
    return DiscreteSpec(vals[i:] + vals[:i], True)


def walks_forward(spec: VariableSpec, sequence) -> bool:
    """True when the walk's first move is a lattice successor step."""
    if len(sequence) < 2 or values_equal(sequence[0], sequence[1]):
        return True
    lat = value_lattice(spec)
    i = lattice_index(spec, sequence[0])
    j = lattice_index(spec, sequence[1])
    if i is None or j is None:
        return True
    return j == (i + 1) % len(lat) if getattr(spec, "cyclic", True) else j == i + 1


def _nearest(spec: VariableSpec, target: str) -> list[str]:
    lat = list(value_lattice(spec))
    try:
        t = Decimal(normalize_value(target))
        nums = [(abs(Decimal(normalize_value(v)) - t), i, v) for i, v in enumerate(lat)]
        return [v for _, _, v in sorted(nums)[:2]]
    except Exception:
        return difflib.get_close_matches(target, lat, n=2, cutoff=0.0)


def repair_and_replan(
    belief: ApplianceModel,
    variable: str,
    new_spec: VariableSpec,
    remaining: TaskPolicy,
    goal: GoalState,
    state: SimState | None = None,
    current: str | None = None,
) -> tuple[ApplianceModel, Plan]:
    """Install ``new_spec`` for ``variable`` and recompile the remaining features."""
    old = belief.variable(variable)
    if current is None:
        current = state.values[belief.var_index[variable]] if state is not None else old.current
    member = canonical_member(new_spec, current)
    if member is None:
        member = value_lattice(new_spec)[0]
    repaired = belief.with_variable(VariableState(variable, new_spec, member))
    target = goal.targets.get(variable)
    if target is not None and lattice_index(new_spec, target) is None:
        raise GoalInfeasible(variable, target, _nearest(new_spec, target))
    goal = _drop_override(goal, variable)
    if state is None:
        state = initial_state(repaired)
    state = state_from_values(repaired, state, {variable: member})
    return repaired, compile_plan(repaired, remaining, goal, state)


def _drop_override(goal: GoalState, variable: str) -> GoalState:
    if variable not in goal.overrides:
        return goal
    return replace(goal, range_overrides=tuple((v, s) for v, s in goal.range_overrides if v != variable))


def _swap_directions(belief: ApplianceModel, variable: str) -> ApplianceModel:
    actions = []
    for a in belief.actions:
        k = a.klass
        if isinstance(k, NeighborForward) and k.variable == variable:
            a = replace(a, klass=NeighborBackward(variable))
        elif isinstance(k, NeighborBackward) and k.variable == variable:
            a = replace(a, klass=NeighborForward(variable))
        actions.append(a)
    return belief.with_actions(tuple(actions))


# ---------------------------------------------------------------------------
# episode


class _Episode:
    def __init__(self, belief, env, policy, goal, budget, repair, cap):
        self.belief = apply_overrides(belief, goal)
        self.goal = goal
        self.env = env
        self.policy = policy
        self.budget = budget
        self.repair = repair
        self.cap = cap
        self.trace = ExecutionTrace()
        self.repairs: list[RepairRecord] = []
        self.exec_steps = 0
        self.reasoning = 0
        self.features_run: set[str] = set()
        self.repair_counts: dict[str, int] = {}
        self.state = initial_state(self.belief)

    # environment access with bookkeeping

    def press(self, action: str, times: int, duration, phase: Phase) -> Observation:
        obs = self.env.step(action, times, duration)
        self.exec_steps += times
        self.trace.append(action, times, phase, obs, duration)
        return obs

    def readout(self, variable: str) -> str | None:
        try:
            return parse_feedback(Observation.from_raw(self.env.render_display()), variable)
        except Unparseable:
            return None

    def observed_values(self, expected, observations: list[Observation]) -> dict[str, str | None]:
        out: dict[str, str | None] = {}
        for var, _ in expected:
            value = None
            for obs in reversed(observations):
                try:
                    value = parse_feedback(obs, var)
                    break
                except Unparseable:
                    continue
            out[var] = value if value is not None else self.readout(var)
        return out

    def finish(self, failure: str | None) -> EpisodeResult:
        success = failure is None and self.goal_reached()
        if failure is None and not success:
            failure = "goal not reached"
        return EpisodeResult(
            success, self.reasoning, self.exec_steps, self.trace, self.repairs, len(self.features_run), failure
        )

    def goal_reached(self) -> bool:
        panel = Observation.from_raw(self.env.render_display())
        for var, target in self.goal.assignments:
            try:
                if not values_equal(parse_feedback(panel, var), target):
                    return False
            except Unparseable:
                return False
        return True

    # main loop

    def run(self) -> EpisodeResult:
        self.env.reset()
        features = list(self.policy.features)
        retries: dict[int, int] = {}
        idx = 0
        while idx < len(features):
            if self.reasoning >= self.budget:
                return self.finish("reasoning budget exhausted")
            self.reasoning += 1
            name = features[idx]
            self.features_run.add(name)
            try:
                macro = self.owned_macro(features, idx)
            except PlanningError as exc:
                return self.finish(f"planning failed in {name}: {exc}")
            observations = [self.press(a, n, d, Phase.PLAN) for a, n, d in macro.actions]
            self.state = run_actions(self.belief, self.state, macro.actions)
            if not self.repair or not macro.expected:
                idx += 1
                continue
            observed = self.observed_values(macro.expected, observations)
            self.state = state_from_values(
                self.belief,
                self.state,
                {v: canonical_member(self.belief.variable(v).spec, val) or self.state.values[self.belief.var_index[v]]
                 for v, val in observed.items() if val is not None},
            )
            verdict = check_macro(macro.expected, observed)
            if isinstance(verdict, Matched):
                idx += 1
                continue
            try:
                self.handle_mismatch(name, verdict, retries, idx)
            except (ApplianceError, InvalidSpec) as exc:
                return self.finish(f"{type(exc).__name__}: {exc}")
        return self.finish(None)

    def owned_macro(self, features: list[str], idx: int) -> CompiledMacro:
        """Compile feature ``idx`` and keep only goal values no later feature rewrites."""
        macro = compile_macro(self.belief, features[idx], self.goal, self.state)
        later: set[str] = set()
        for f in features[idx + 1:]:
            later |= self.belief.feature_variables(f)
        keep = tuple((v, val) for v, val in macro.expected if v not in later)
        return replace(macro, expected=keep)

    def handle_mismatch(self, feature: str, verdict: Mismatch, retries: dict[int, int], idx: int) -> None:
        var = verdict.variable
        step = self.adjusting_step(feature, var)
        if step is None or not any(is_neighbor(self.belief.action(a).klass) for a in step.actions):
            # go-to and digit steps get one plain retry from the re-estimated state
            retries[idx] = retries.get(idx, 0) + 1
            if retries[idx] > 1:
                raise PlanningError(f"{var} still wrong after retrying {feature}")
            return
        count = self.repair_counts.get(var, 0) + 1
        if count > MAX_REPAIRS_PER_VARIABLE:
            raise PlanningError(f"{var} still wrong after {count - 1} repairs")
        self.repair_counts[var] = count
        self.explore_and_repair(feature, step, var, idx)

    def adjusting_step(self, feature: str, var: str):
        for step in self.belief.feature(feature).steps:
            if resolve_variable(self.belief, self.state.values, step.variable) == var:
                return step
        return None

    def neighbor_keys(self, step) -> tuple[str | None, str | None]:
        fwd = bwd = None
        for a in step.actions:
            k = self.belief.action(a).klass
            if isinstance(k, NeighborForward) and fwd is None:
                fwd = a
            elif isinstance(k, NeighborBackward) and bwd is None:
                bwd = a
        return fwd, bwd

    def route_into(self, feature: str, step, action: str) -> None:
        """Press entry keys until one press of ``action`` lands inside ``step``."""
        k = self.belief.action(action).klass
        if k.variable is not None:
            return
        target = FeatureCursor(feature, step.index)
        after, _ = _peek(self.belief, self.state, action)
        if after.cursor == target:
            return
        entry = [
            (s.actions[0], 1, self.belief.action(s.actions[0]).hold_duration)
            for s in self.belief.feature(feature).steps[: step.index - 1]
            if s.variable is None and s.actions
        ]
        for a, n, d in entry:
            probe = run_actions(self.belief, self.state, [(a, n, d)])
            self.press(a, n, d, Phase.EXPLORE)
            self.state = probe
            after, _ = _peek(self.belief, self.state, action)
            if after.cursor == target:
                return
        raise PlanningError(f"cannot route the cursor into {feature} step {step.index}")

    def explore_and_repair(self, feature: str, step, var: str, idx: int) -> None:
        fwd, bwd = self.neighbor_keys(step)
        action = fwd or bwd
        duration = self.belief.action(action).hold_duration
        self.route_into(feature, step, action)
        seed = self.readout(var)
        if seed is None:
            raise Unparseable(f"panel does not show {var}")

        def record(a: str, obs: Observation) -> None:
            self.exec_steps += 1
            self.trace.append(a, 1, Phase.EXPLORE, obs, duration)
            self.state = run_actions(self.belief, self.state, [(a, 1, duration)])

        seq = explore_cycle(self.env, action, seed, var, cap=self.cap, duration=duration, on_step=record)
        walk, last = seq, seq[-1]
        other = bwd if action == fwd else fwd
        if values_equal(seq[-1], seq[-2]) and other is not None:
            # saturating: walk back to the other end, then read the range bottom-up
            down = explore_cycle(self.env, other, seq[-1], var, cap=self.cap, duration=duration, on_step=record)
            walk, last = list(reversed(down[:-1])) + [down[0]], down[-1]

        old_spec = self.belief.variable(var).spec
        new_spec = infer_spec(walk, old_spec)
        swapped = False
        explore_cls = self.belief.action(action).klass
        if isinstance(new_spec, DiscreteSpec):
            if isinstance(explore_cls, NeighborBackward):
                new_spec = _anchored(DiscreteSpec(tuple(reversed(new_spec.ordered_values)), new_spec.cyclic), old_spec)
        elif walks_forward(new_spec, walk) != isinstance(explore_cls, NeighborForward):
            if explore_cls.variable is not None:
                self.belief = _swap_directions(self.belief, var)
                swapped = True
            else:
                # a shared +/- key cannot be flipped; keep the observed order instead
                order = list(walk[:-1])
                if isinstance(explore_cls, NeighborBackward):
                    order.reverse()
                new_spec = _anchored(DiscreteSpec(tuple(order), new_spec.cyclic), old_spec)
        self.repairs.append(RepairRecord(var, tuple(seq), old_spec, new_spec, swapped))
        remaining = TaskPolicy(self.policy.features[idx:], self.policy.changing_variables)
        self.belief, _ = repair_and_replan(self.belief, var, new_spec, remaining, self.goal, self.state, last)
        self.goal = _drop_override(self.goal, var)
        member = canonical_member(new_spec, last)
        self.state = state_from_values(self.belief, self.state, {var: member})


def _peek(model: ApplianceModel, state: SimState, action: str) -> tuple[SimState, object]:
    from .simulator import transition

    return transition(model, state, action)


def run_episode(
    belief: ApplianceModel,
    env: Environment,
    policy: TaskPolicy,
    goal: GoalState,
    budget: int = 25,
    *,
    repair: bool = True,
    exploration_cap: int = EXPLORATION_CAP,
) -> EpisodeResult:
    """Execute ``policy`` macro by macro, repairing the belief on mismatches."""
    return _Episode(belief, env, policy, goal, budget, repair, exploration_cap).run()


def episode_to_json(result: EpisodeResult) -> dict:
    """Plain-JSON view of an episode: counters, repairs and the full trace."""
    from .schema import spec_to_json

    return {
        "success": result.success,
        "failure": result.failure,
        "reasoning_steps": result.reasoning_steps,
        "unique_macros": result.unique_macros,
        "execution_steps": result.execution_steps,
        "repairs": [
            {
                "variable": r.variable,
                "observed_sequence": list(r.observed_sequence),
                "old_spec": spec_to_json(r.old_spec),
                "new_spec": spec_to_json(r.new_spec),
                "swapped_directions": r.swapped_directions,
            }
            for r in result.repairs
        ],
        "trace": [
            {
                "step": t.step_index,
                "action": t.action,
                "times": t.times,
                "phase": t.phase.value,
                "duration": None if t.duration is None else str(t.duration),
                "observation": t.observation.raw,
            }
            for t in result.trace.records
        ],
    }
