"""Benchmark harness: controlled model faults, an optimal-steps oracle, metrics.

SPL here is the usual success-weighted path length,
``(1/N) * sum(S_i * l_i / max(p_i, l_i))`` with ``l`` the optimal number of
presses and ``p`` the presses actually made (exploration included); a row
with ``l == p == 0`` contributes its success flag.
"""

from __future__ import annotations

import heapq
import itertools
import random
from fractions import Fraction
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from decimal import Decimal
from functools import lru_cache
from typing import Iterable, Union

from .compiler import apply_overrides, compile_plan
from .errors import ApplianceError, GoalUnreachable, InvalidSpec, NotApplicable, PlanningError
from .executor import run_episode
from .model import (
    ApplianceModel,
    Digit,
    GoalState,
    GoTo,
    NeighborBackward,
    NeighborForward,
    TaskPolicy,
    VariableState,
)
from .schema import SCHEMA_VERSION, FixtureBundle, ModelDocument, Provenance, dumps
from .simulator import Simulator, initial_state, transition, update_cursor
from .validator import errors_only, validate, validate_goal
from .values import (
    ContinuousSpec,
    DiscreteSpec,
    InputBufferSpec,
    Segment,
    TimeSpec,
    is_cyclic,
    lattice_index,
    normalize_value,
    value_lattice,
    values_equal,
)

SPL_FORMULA = "SPL = (1/N) * sum_i S_i * l_i / max(p_i, l_i); l = optimal presses, p = presses made incl. exploration"

# ---------------------------------------------------------------------------
# perturbations


@dataclass(frozen=True)
class WrongStep:
    factor: int = 2

    @property
    def label(self) -> str:
        return f"wrong_step(x{self.factor})"


@dataclass(frozen=True)
class WrongRangeBound:
    delta: int = 2

    @property
    def label(self) -> str:
        return f"wrong_range_bound({self.delta:+d})"


@dataclass(frozen=True)
class WrongValueOrder:
    @property
    def label(self) -> str:
        return "wrong_value_order"


@dataclass(frozen=True)
class WrongCurrentValue:
    offset: int = 1

    @property
    def label(self) -> str:
        return f"wrong_current_value({self.offset:+d})"


@dataclass(frozen=True)
class WrongDirection:
    @property
    def label(self) -> str:
        return "wrong_direction"


Perturbation = Union[WrongStep, WrongRangeBound, WrongValueOrder, WrongCurrentValue, WrongDirection]

DEFAULT_PERTURBATIONS: tuple[Perturbation, ...] = (
    WrongStep(2),
    WrongRangeBound(2),
    WrongRangeBound(-2),
    WrongValueOrder(),
    WrongCurrentValue(1),
    WrongDirection(),
)


def parse_perturbations(text: str) -> list[Perturbation]:
    """``all``, ``none`` or a comma list such as ``wrong_step,wrong_direction``."""
    text = text.strip()
    if text == "all":
        return list(DEFAULT_PERTURBATIONS)
    if text in ("", "none"):
        return []
    out: list[Perturbation] = []
    for item in text.split(","):
        item = item.strip()
        name, _, arg = item.partition(":")
        if name == "wrong_step":
            out.append(WrongStep(int(arg or 2)))
        elif name == "wrong_range_bound":
            out.append(WrongRangeBound(int(arg or 2)))
        elif name == "wrong_value_order":
            out.append(WrongValueOrder())
        elif name == "wrong_current_value":
            out.append(WrongCurrentValue(int(arg or 1)))
        elif name == "wrong_direction":
            out.append(WrongDirection())
        else:
            raise ValueError(f"unknown perturbation {item!r}")
    return out


def _snap(spec, current: str) -> str:
    """Nearest member of ``spec`` to ``current`` (ties go to the lower value)."""
    lat = value_lattice(spec)
    if lattice_index(spec, current) is not None:
        return lat[lattice_index(spec, current)]
    try:
        c = _numeric_key(current)
        return min(lat, key=lambda v: (abs(_numeric_key(v) - c), _numeric_key(v)))
    except Exception:
        return lat[0]


def _numeric_key(v: str) -> Decimal:
    n = normalize_value(v)
    if ":" in n:
        h, m, s = n.split(":")
        return Decimal(int(h) * 3600 + int(m) * 60 + int(s))
    return Decimal(n)


def _respan(spec, segments: list[Segment]):
    if isinstance(spec, TimeSpec):
        return TimeSpec(tuple(segments), spec.cyclic)
    return ContinuousSpec(tuple(segments), spec.unit, spec.cyclic)


def _perturb_variable(model: ApplianceModel, p: Perturbation, var: str, rng: random.Random) -> ApplianceModel:
    state = model.variable(var)
    spec = state.spec
    if isinstance(spec, InputBufferSpec):
        raise NotApplicable("input buffers carry no lattice")
    lat = value_lattice(spec)

    if isinstance(p, WrongStep):
        if not isinstance(spec, (ContinuousSpec, TimeSpec)):
            raise NotApplicable("step faults need a numeric variable")
        segs = []
        for s in spec.ranges:
            step = s.step * p.factor
            span = ((s.high - s.low) // step) * step
            segs.append(Segment(s.low, s.low + span, step))
        new = _respan(spec, segs)
    elif isinstance(p, WrongRangeBound):
        if not isinstance(spec, (ContinuousSpec, TimeSpec)):
            raise NotApplicable("range faults need a numeric variable")
        last = spec.ranges[-1]
        high = last.high + p.delta * last.step
        if high < last.low or high < 0:
            raise NotApplicable("the range would become empty")
        new = _respan(spec, list(spec.ranges[:-1]) + [Segment(last.low, high, last.step)])
    elif isinstance(p, WrongValueOrder):
        if not isinstance(spec, DiscreteSpec) or len(lat) < 3:
            raise NotApplicable("order faults need a discrete variable with three or more values")
        order = list(lat)
        for _ in range(100):
            rng.shuffle(order)
            if not any(order == list(lat[i:] + lat[:i]) for i in range(len(lat))):
                break
        else:
            raise NotApplicable("could not find a non-rotated order")
        new = DiscreteSpec(tuple(order), spec.cyclic)
    elif isinstance(p, WrongCurrentValue):
        if len(lat) < 2:
            raise NotApplicable("a single-value lattice has no wrong current value")
        i = lattice_index(spec, state.current)
        return model.with_variable(VariableState(var, spec, lat[(i + p.offset) % len(lat)]))
    elif isinstance(p, WrongDirection):
        if len(lat) < 3:
            raise NotApplicable("direction is meaningless on fewer than three values")
        keys = [
            a for a in model.actions
            if isinstance(a.klass, (NeighborForward, NeighborBackward)) and a.klass.variable == var
        ]
        if not keys:
            raise NotApplicable("no key is bound to this variable")
        swapped = []
        for a in model.actions:
            if a in keys:
                flip = NeighborBackward if isinstance(a.klass, NeighborForward) else NeighborForward
                a = replace(a, klass=flip(var))
            swapped.append(a)
        return model.with_actions(tuple(swapped))
    else:
        raise NotApplicable(f"unknown perturbation {p!r}")

    if value_lattice(new) == lat:
        raise NotApplicable("the fault leaves the lattice unchanged")
    return model.with_variable(VariableState(var, new, _snap(new, state.current)))


def perturb(model, p: Perturbation, seed: int | str, variable: str | None = None) -> ModelDocument:
    """Inject one semantic fault; deterministic in (model, p, seed, variable)."""
    if isinstance(model, ModelDocument):
        model = model.model
    rng = random.Random(f"{seed}:{p.label}")
    names = [variable] if variable is not None else [v.name for v in model.variables]
    if variable is None:
        rng.shuffle(names)
    for name in names:
        try:
            faulty = _perturb_variable(model, p, name, random.Random(f"{seed}:{p.label}:{name}"))
        except (NotApplicable, InvalidSpec):
            continue
        if errors_only(validate(faulty)):
            continue
        return ModelDocument(faulty, Provenance("perturbed", f"{p.label} on {name} (seed {seed})"))
    raise NotApplicable(f"{p.label} applies to none of {names}")


# ---------------------------------------------------------------------------
# optimal steps oracle


def _relevant_indices(model: ApplianceModel, goal: GoalState) -> list[int]:
    names = set(goal.targets)
    g = model.guards
    names |= {v for v in (g.power_variable, g.lock_variable) if v}
    if model.program_map is not None:
        names.add(model.program_map.selector)
    if model.buffer_variable:
        names.add(model.buffer_variable)
    for a in model.actions:
        if isinstance(a.klass, GoTo):
            names |= {v for v, _ in a.klass.guard}
    return sorted(model.var_index[n] for n in names)


def _jump_setters(model: ApplianceModel) -> set[str]:
    """Variables that some press can set directly rather than one lattice step at a time."""
    out: set[str] = set()
    for a in model.actions:
        if isinstance(a.klass, GoTo):
            out |= {v for v, _ in a.klass.effects}
    for f in model.features:
        for s in f.steps:
            out |= {v for v, _ in s.fixed_effects}
            if s.input_format is not None and s.variable is not None:
                out |= {s.variable}
                if model.program_map and s.variable == model.program_map.placeholder:
                    out |= {v for _, v in model.program_map.bindings}
    return out


def _neighbor_moves(model: ApplianceModel, keys: list[str]) -> dict[str, set[str]]:
    """Variables each direction of neighbor key can move, given the usable keys."""
    moves: dict[str, set[str]] = {"fwd": set(), "bwd": set()}
    pm = model.program_map
    for a in keys:
        k = model.action(a).klass
        if not isinstance(k, (NeighborForward, NeighborBackward)):
            continue
        side = moves["fwd" if isinstance(k, NeighborForward) else "bwd"]
        names = {k.variable} if k.variable else {
            s.variable for f in model.features for s in f.steps if a in s.actions and s.variable
        }
        for v in names:
            side.add(v)
            if pm is not None and v == pm.placeholder:
                side |= {b for _, b in pm.bindings}
    return moves


def _max_goal_changes(model: ApplianceModel, goal_vars: set[str]) -> int:
    """Upper bound on how many goal variables a single press can change."""
    best = 1
    for a in model.actions:
        own: set[str] = set()
        if isinstance(a.klass, GoTo):
            own = {v for v, _ in a.klass.effects} & goal_vars
        steps = [s for f in model.features for s in f.steps if a.name in s.actions]
        for s in steps:
            entered = own | ({v for v, _ in s.fixed_effects} & goal_vars)
            best = max(best, len(entered) + (0 if isinstance(a.klass, GoTo) else 1))
    return best


def optimal_steps(truth: ApplianceModel, policy: TaskPolicy, goal: GoalState, max_states: int = 2_000_000) -> int:
    """Fewest presses reaching the goal, by A* search over simulator states.

    Only keys used by the policy's features are pressed.  States are
    deduplicated on the variables that can influence the goal (goal
    variables, guards, program selector, go-to guards, digit buffer) plus the
    feature cursor; other variables never feed back into those.  Buffers that
    differ only in leading zeros are merged since every digit format ignores
    them.  The heuristic sums a per-variable lower bound (lattice distance for
    variables that only move one step per press, otherwise 1) and divides by
    the most goal variables one press can change, so it never overestimates
    and drops by at most 1 per press.
    """
    truth = apply_overrides(truth, goal)
    keys: list[str] = []
    for f in policy.features:
        for step in truth.feature(f).steps:
            for a in step.actions:
                if a not in keys:
                    keys.append(a)
    targets = [(truth.var_index[v], v, t) for v, t in goal.assignments]
    proj = _relevant_indices(truth, goal)
    buf = truth.var_index.get(truth.buffer_variable) if truth.buffer_variable else None
    jumps = _jump_setters(truth)
    k = Fraction(_max_goal_changes(truth, set(goal.targets)))
    moves = _neighbor_moves(truth, keys)

    def lower_bound(state) -> Fraction:
        total = 0
        for i, name, t in targets:
            cur = state.values[i]
            if values_equal(cur, t):
                continue
            if name in jumps:
                total += 1
                continue
            spec = truth.variable(name).spec
            c, g = lattice_index(spec, cur), lattice_index(spec, t)
            n = len(value_lattice(spec))
            if c is None or g is None:
                total += 1
            else:
                options = []
                if name in moves["fwd"]:
                    options.append((g - c) % n if is_cyclic(spec) else (g - c if g >= c else None))
                if name in moves["bwd"]:
                    options.append((c - g) % n if is_cyclic(spec) else (c - g if c >= g else None))
                options = [o for o in options if o is not None]
                total += min(options) if options else 1
        return Fraction(total) / k

    digit_keys = [a for a in keys if isinstance(truth.action(a).klass, Digit)]

    @lru_cache(maxsize=None)
    def buffer_matters(cursor) -> bool:
        # can digit presses alone carry the cursor into a step that parses the buffer?
        seen, stack = {cursor}, [cursor]
        while stack:
            c = stack.pop()
            if c.feature in truth.feature_map and truth.feature(c.feature).step(c.step).requires_input_parse:
                return True
            for a in digit_keys:
                n, _ = update_cursor(truth, c, a)
                if n not in seen:
                    seen.add(n)
                    stack.append(n)
        return False

    def key(state):
        vals = list(state.values[i] for i in proj)
        if buf is not None:
            j = proj.index(buf)
            vals[j] = vals[j].lstrip("0") if buffer_matters(state.cursor) else ""
        return tuple(vals), state.cursor

    start = initial_state(truth)
    best = {key(start): 0}
    tie = itertools.count()
    heap = [(lower_bound(start), 0, next(tie), start)]
    while heap:
        _, depth, _, state = heapq.heappop(heap)
        if best.get(key(state), depth) < depth:
            continue
        if all(values_equal(state.values[i], t) for i, _, t in targets):
            return depth
        for a in keys:
            nxt, _ = transition(truth, state, a)
            kn = key(nxt)
            if kn in best and best[kn] <= depth + 1:
                continue
            best[kn] = depth + 1
            if len(best) > max_states:
                raise GoalUnreachable(f"search gave up after {max_states} states")
            heapq.heappush(heap, (depth + 1 + lower_bound(nxt), depth + 1, next(tie), nxt))
    raise GoalUnreachable("goal is not reachable with the policy's keys")


# ---------------------------------------------------------------------------
# suite


@dataclass(frozen=True)
class WorkItem:
    bundle: str
    task_index: int
    perturbation: Perturbation | None
    truth: ApplianceModel
    policy: TaskPolicy | None
    goal: GoalState
    optimal: int | None
    seed: int
    budget: int
    repair: bool


def _plans_differ(belief, truth, policy, goal) -> bool:
    return compile_plan(belief, policy, goal) != compile_plan(truth, policy, goal)


def choose_fault(item: WorkItem) -> tuple[ApplianceModel, str] | None:
    """Belief model for a work item: the first goal variable whose fault matters.

    A candidate fault must keep the belief admissible, keep the goal valid
    under the belief, still compile, and change the compiled plan.
    """
    p = item.perturbation
    candidates = [v for v, _ in item.goal.assignments]
    random.Random(f"{item.seed}:{item.bundle}:{item.task_index}:{p.label}").shuffle(candidates)
    for var in candidates:
        try:
            belief = perturb(item.truth, p, item.seed, variable=var).model
        except NotApplicable:
            continue
        if errors_only(validate_goal(belief, item.goal, item.policy)):
            continue
        try:
            if not _plans_differ(belief, item.truth, item.policy, item.goal):
                continue
        except PlanningError:
            continue
        return belief, var
    return None


def run_item(item: WorkItem) -> dict:
    label = item.perturbation.label if item.perturbation is not None else "none"
    row = {
        "bundle": item.bundle,
        "task": item.task_index,
        "perturbation": label,
        "variable": None,
        "applicable": True,
        "success": False,
        "reasoning_steps": 0,
        "unique_macros": 0,
        "execution_steps": 0,
        "optimal_steps": None,
        "repairs": 0,
        "failure": None,
    }
    if item.policy is None:
        row.update(failure="task has no policy")
        return row
    belief = item.truth
    if item.perturbation is not None:
        chosen = choose_fault(item)
        if chosen is None:
            row.update(applicable=False)
            return row
        belief, row["variable"] = chosen
    try:
        row["optimal_steps"] = item.optimal if item.optimal is not None else optimal_steps(item.truth, item.policy, item.goal)
    except ApplianceError as exc:
        row.update(failure=f"oracle: {exc}")
        return row
    res = run_episode(belief, Simulator(item.truth), item.policy, item.goal, item.budget, repair=item.repair)
    row.update(
        success=res.success,
        reasoning_steps=res.reasoning_steps,
        unique_macros=res.unique_macros,
        execution_steps=res.execution_steps,
        repairs=len(res.repairs),
        failure=res.failure,
    )
    return row


def spl_term(success: bool, optimal: int, actual: int) -> float:
    if not success:
        return 0.0
    if optimal == 0 and actual == 0:
        return 1.0
    return optimal / max(actual, optimal)


def aggregate(rows: list[dict]) -> dict:
    rows = [r for r in rows if r["applicable"]]
    n = len(rows)
    if n == 0:
        return {"n": 0, "SR": 0.0, "SPL": 0.0, "avg_reasoning_steps": 0.0, "avg_execution_steps": 0.0}
    return {
        "n": n,
        "SR": sum(r["success"] for r in rows) / n,
        "SPL": sum(spl_term(r["success"], r["optimal_steps"] or 0, r["execution_steps"]) for r in rows) / n,
        "avg_reasoning_steps": sum(r["reasoning_steps"] for r in rows) / n,
        "avg_execution_steps": sum(r["execution_steps"] for r in rows) / n,
    }


def check_identities(report: dict) -> dict[str, bool]:
    """The metric relations every report must satisfy."""
    rows = [r for r in report["rows"] if r["applicable"]]
    groups = {"all": report["aggregates"]["all"], **report["aggregates"]["by_perturbation"]}
    spl_le_sr = all(a["SPL"] <= a["SR"] + 1e-12 for a in groups.values())
    exec_ge_opt = all(r["execution_steps"] >= (r["optimal_steps"] or 0) for r in rows if r["success"])
    iff = True
    for label, a in groups.items():
        members = rows if label == "all" else [r for r in rows if r["perturbation"] == label]
        all_opt = all(r["execution_steps"] == r["optimal_steps"] for r in members if r["success"])
        iff = iff and ((abs(a["SPL"] - a["SR"]) < 1e-12) == all_opt)
    return {
        "spl_le_sr": spl_le_sr,
        "spl_eq_sr_iff_all_successes_optimal": iff,
        "execution_ge_optimal_on_success": exec_ge_opt,
    }


def build_items(
    bundles: Iterable[FixtureBundle],
    perturbations: list[Perturbation] | None,
    *,
    seed: int = 0,
    budget: int = 25,
    repair: bool = True,
) -> list[WorkItem]:
    labels: list[Perturbation | None] = list(perturbations) if perturbations else [None]
    items = []
    for b in bundles:
        for i, t in enumerate(b.tasks):
            for p in labels:
                items.append(
                    WorkItem(b.name, i, p, b.model_doc.model, t.policy, t.goal, t.optimal_execution_steps, seed, budget, repair)
                )
    return items


def run_suite(
    bundles: Iterable[FixtureBundle],
    perturbations: list[Perturbation] | None = None,
    budget: int = 25,
    jobs: int = 1,
    *,
    seed: int = 0,
    repair: bool = True,
) -> dict:
    """Run every task under every perturbation and return the metrics report."""
    bundles = list(bundles)
    items = build_items(bundles, perturbations, seed=seed, budget=budget, repair=repair)
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(run_item, items, chunksize=4))
    else:
        rows = [run_item(it) for it in items]
    rows.sort(key=lambda r: (r["bundle"], r["task"], r["perturbation"]))
    labels = sorted({r["perturbation"] for r in rows})
    report = {
        "schema_version": SCHEMA_VERSION,
        "metric_notes": {"spl": SPL_FORMULA, "execution_steps": "presses including exploration"},
        "config": {
            "budget": budget,
            "seed": seed,
            "repair": repair,
            "perturbations": [p.label for p in perturbations] if perturbations else [],
            "bundles": [b.name for b in bundles],
        },
        "rows": rows,
        "aggregates": {
            "all": aggregate(rows),
            "by_perturbation": {lab: aggregate([r for r in rows if r["perturbation"] == lab]) for lab in labels},
            "by_bundle": {b.name: aggregate([r for r in rows if r["bundle"] == b.name]) for b in bundles},
        },
    }
    report["identities"] = check_identities(report)
    return report


def save_report(report: dict) -> bytes:
    return dumps(report)
