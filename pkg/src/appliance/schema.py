"""JSON documents for models, task suites, traces and plans.

Canonical form: ``json.dumps(doc, sort_keys=True, indent=2) + "\\n"`` with
every optional key written out (``null`` when absent), so loading and saving
a canonical document reproduces it byte for byte.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from decimal import Decimal
from pathlib import Path
from typing import Any

from .errors import InvalidSpec, InvariantViolation, ParseError, SchemaVersionUnsupported
from .model import (
    ApplianceModel,
    Digit,
    Feature,
    FeatureCursor,
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
from .values import (
    ContinuousSpec,
    DiscreteSpec,
    InputBufferSpec,
    Segment,
    TimeSpec,
    VariableSpec,
    format_clock,
)

SCHEMA_VERSION = "1.0"
SUPPORTED_VERSIONS = ("1.0",)
PROVENANCE_KINDS = ("ground_truth", "extracted", "perturbed")


@dataclass(frozen=True)
class Provenance:
    kind: str = "ground_truth"
    note: str = ""


@dataclass(frozen=True)
class ModelDocument:
    model: ApplianceModel
    provenance: Provenance = Provenance()
    schema_version: str = SCHEMA_VERSION


@dataclass(frozen=True)
class TaskDocument:
    instruction: str
    goal: GoalState
    policy: TaskPolicy | None = None
    optimal_execution_steps: int | None = None


@dataclass(frozen=True)
class FixtureBundle:
    name: str
    manual_text: str
    model_doc: ModelDocument
    tasks: tuple[TaskDocument, ...] = field(default_factory=tuple)


def dumps(doc: Any) -> bytes:
    return (json.dumps(doc, sort_keys=True, indent=2, ensure_ascii=False) + "\n").encode("utf-8")


# ---------------------------------------------------------------------------
# reading helpers


class _Reader:
    def __init__(self, strict: bool):
        self.strict = strict

    def obj(self, data: Any, path: str, required: set[str], optional: set[str] = frozenset()) -> dict:
        if not isinstance(data, dict):
            raise ParseError("expected an object", path)
        missing = required - data.keys()
        if missing:
            raise ParseError(f"missing field(s) {sorted(missing)}", path)
        unknown = data.keys() - required - optional
        if unknown:
            msg = f"unknown field(s) {sorted(unknown)}"
            if self.strict:
                raise ParseError(msg, path)
            warnings.warn(f"{path}: {msg}", stacklevel=3)
        return data

    @staticmethod
    def list(data: Any, path: str) -> list:
        if not isinstance(data, list):
            raise ParseError("expected a list", path)
        return data

    @staticmethod
    def str(data: Any, path: str, allow_none: bool = False) -> str | None:
        if data is None and allow_none:
            return None
        if not isinstance(data, str):
            raise ParseError("expected a string", path)
        return data

    @staticmethod
    def pairs(data: Any, path: str) -> tuple[tuple[str, str], ...]:
        out = []
        for i, p in enumerate(_Reader.list(data, path)):
            if not (isinstance(p, list) and len(p) == 2 and all(isinstance(x, str) for x in p)):
                raise ParseError("expected a [name, value] pair of strings", f"{path}[{i}]")
            out.append((p[0], p[1]))
        return tuple(out)


def _number_out(d: Decimal) -> int | float:
    return int(d) if d == d.to_integral_value() else float(d)


# ---------------------------------------------------------------------------
# specs


def spec_to_json(spec: VariableSpec) -> dict:
    if isinstance(spec, DiscreteSpec):
        return {"kind": "discrete", "values": list(spec.ordered_values), "cyclic": spec.cyclic}
    if isinstance(spec, ContinuousSpec):
        return {
            "kind": "continuous",
            "ranges": [[_number_out(s.low), _number_out(s.high), _number_out(s.step)] for s in spec.ranges],
            "unit": spec.unit,
            "cyclic": spec.cyclic,
        }
    if isinstance(spec, TimeSpec):
        return {
            "kind": "time",
            "ranges": [[format_clock(int(s.low)), format_clock(int(s.high)), int(s.step)] for s in spec.ranges],
            "cyclic": spec.cyclic,
        }
    return {"kind": "input_buffer", "max_digits": spec.max_digits}


def _num(x: Any, path: str) -> Decimal:
    if isinstance(x, bool) or not isinstance(x, (int, float, Decimal)):
        raise ParseError("expected a number", path)
    return x if isinstance(x, Decimal) else Decimal(repr(x)) if isinstance(x, float) else Decimal(x)


def spec_from_json(data: Any, path: str, r: _Reader | None = None) -> VariableSpec:
    r = r or _Reader(True)
    if not isinstance(data, dict) or "kind" not in data:
        raise ParseError("expected a spec object with 'kind'", path)
    kind = data["kind"]
    try:
        if kind == "discrete":
            d = r.obj(data, path, {"kind", "values"}, {"cyclic"})
            values = r.list(d["values"], path + ".values")
            for i, v in enumerate(values):
                r.str(v, f"{path}.values[{i}]")
            return DiscreteSpec(tuple(values), bool(d.get("cyclic", True)))
        if kind == "continuous":
            d = r.obj(data, path, {"kind", "ranges"}, {"unit", "cyclic"})
            segs = []
            for i, seg in enumerate(r.list(d["ranges"], path + ".ranges")):
                p = f"{path}.ranges[{i}]"
                if not (isinstance(seg, list) and len(seg) == 3):
                    raise ParseError("expected [low, high, step]", p)
                segs.append(Segment(*(_num(x, p) for x in seg)))
            return ContinuousSpec(tuple(segs), r.str(d.get("unit", ""), path + ".unit"), bool(d.get("cyclic", True)))
        if kind == "time":
            d = r.obj(data, path, {"kind", "ranges"}, {"cyclic"})
            segs = []
            for i, seg in enumerate(r.list(d["ranges"], path + ".ranges")):
                p = f"{path}.ranges[{i}]"
                if not (isinstance(seg, list) and len(seg) == 3 and isinstance(seg[0], str) and isinstance(seg[1], str)):
                    raise ParseError('expected ["HH:MM:SS", "HH:MM:SS", seconds]', p)
                segs.append((seg[0], seg[1], _num(seg[2], p)))
            return TimeSpec(tuple(segs), bool(d.get("cyclic", True)))
        if kind == "input_buffer":
            d = r.obj(data, path, {"kind"}, {"max_digits"})
            md = d.get("max_digits", 6)
            if isinstance(md, bool) or not isinstance(md, int):
                raise ParseError("max_digits must be an integer", path + ".max_digits")
            return InputBufferSpec(md)
    except InvalidSpec as exc:
        raise ParseError(str(exc), path) from exc
    raise ParseError(f"unknown spec kind {kind!r}", path + ".kind")


# ---------------------------------------------------------------------------
# models


def _class_to_json(k) -> dict:
    if isinstance(k, NeighborForward):
        return {"kind": "neighbor_forward", "variable": k.variable}
    if isinstance(k, NeighborBackward):
        return {"kind": "neighbor_backward", "variable": k.variable}
    if isinstance(k, GoTo):
        return {"kind": "goto", "effects": [list(e) for e in k.effects], "guard": [list(g) for g in k.guard]}
    return {"kind": "digit", "digit": k.digit}


def _class_from_json(data: Any, path: str, r: _Reader):
    if not isinstance(data, dict) or "kind" not in data:
        raise ParseError("expected an action class with 'kind'", path)
    kind = data["kind"]
    if kind in ("neighbor_forward", "neighbor_backward"):
        d = r.obj(data, path, {"kind"}, {"variable"})
        var = r.str(d.get("variable"), path + ".variable", allow_none=True)
        return (NeighborForward if kind == "neighbor_forward" else NeighborBackward)(var)
    if kind == "goto":
        d = r.obj(data, path, {"kind", "effects"}, {"guard"})
        return GoTo(r.pairs(d["effects"], path + ".effects"), r.pairs(d.get("guard", []), path + ".guard"))
    if kind == "digit":
        d = r.obj(data, path, {"kind", "digit"})
        dg = d["digit"]
        if isinstance(dg, bool) or not isinstance(dg, int) or not 0 <= dg <= 9:
            raise ParseError("digit must be an integer 0-9", path + ".digit")
        return Digit(dg)
    raise ParseError(f"unknown action class {kind!r}", path + ".kind")


def model_to_json(m: ApplianceModel) -> dict:
    variables = []
    for v in m.variables:
        entry = {"name": v.name, "current": v.current, "spec": spec_to_json(v.spec)}
        variables.append(entry)
    actions = [
        {
            "name": a.name,
            "skill": a.skill.value,
            "hold_duration": None if a.hold_duration is None else _number_out(a.hold_duration),
            "class": _class_to_json(a.klass),
        }
        for a in m.actions
    ]
    features = [
        {
            "name": f.name,
            "steps": [
                {
                    "index": s.index,
                    "actions": list(s.actions),
                    "variable": s.variable,
                    "fixed_effects": [list(e) for e in s.fixed_effects],
                    "input_format": s.input_format,
                }
                for s in f.steps
            ],
        }
        for f in m.features
    ]
    g = m.guards
    pm = m.program_map
    return {
        "variables": variables,
        "actions": actions,
        "features": features,
        "guards": {
            "power_variable": g.power_variable,
            "power_off_value": g.power_off_value,
            "lock_variable": g.lock_variable,
            "locked_value": g.locked_value,
        },
        "program_map": None
        if pm is None
        else {"selector": pm.selector, "placeholder": pm.placeholder, "bindings": [list(b) for b in pm.bindings]},
        "input_reset_on_switch": m.input_reset_on_switch,
        "cursor": {"feature": m.cursor.feature, "step": m.cursor.step},
    }


def _int(x: Any, path: str) -> int:
    if isinstance(x, bool) or not isinstance(x, int):
        raise ParseError("expected an integer", path)
    return x


def model_from_json(data: Any, path: str = "$.model", strict: bool = True) -> ApplianceModel:
    r = _Reader(strict)
    d = r.obj(
        data,
        path,
        {"variables", "actions", "features"},
        {"guards", "program_map", "input_reset_on_switch", "cursor"},
    )
    try:
        variables = []
        for i, v in enumerate(r.list(d["variables"], path + ".variables")):
            p = f"{path}.variables[{i}]"
            v = r.obj(v, p, {"name", "spec"}, {"current"})
            spec = spec_from_json(v["spec"], p + ".spec", r)
            current = r.str(v.get("current", ""), p + ".current")
            try:
                variables.append(VariableState(r.str(v["name"], p + ".name"), spec, current))
            except InvalidSpec as exc:
                raise ParseError(str(exc), p + ".current") from exc

        actions = []
        for i, a in enumerate(r.list(d["actions"], path + ".actions")):
            p = f"{path}.actions[{i}]"
            a = r.obj(a, p, {"name", "skill", "class"}, {"hold_duration"})
            hd = a.get("hold_duration")
            try:
                actions.append(
                    SymbolicAction(
                        r.str(a["name"], p + ".name"),
                        r.str(a["skill"], p + ".skill"),
                        _class_from_json(a["class"], p + ".class", r),
                        None if hd is None else _num(hd, p + ".hold_duration"),
                    )
                )
            except (InvalidSpec, ValueError) as exc:
                raise ParseError(str(exc), p) from exc

        features = []
        for i, f in enumerate(r.list(d["features"], path + ".features")):
            p = f"{path}.features[{i}]"
            f = r.obj(f, p, {"name", "steps"})
            steps = []
            for j, s in enumerate(r.list(f["steps"], p + ".steps")):
                sp = f"{p}.steps[{j}]"
                s = r.obj(s, sp, {"index", "actions"}, {"variable", "fixed_effects", "input_format"})
                acts = r.list(s["actions"], sp + ".actions")
                for k, a in enumerate(acts):
                    r.str(a, f"{sp}.actions[{k}]")
                try:
                    steps.append(
                        FeatureStep(
                            _int(s["index"], sp + ".index"),
                            tuple(acts),
                            r.str(s.get("variable"), sp + ".variable", allow_none=True),
                            r.pairs(s.get("fixed_effects", []), sp + ".fixed_effects"),
                            r.str(s.get("input_format"), sp + ".input_format", allow_none=True),
                        )
                    )
                except InvalidSpec as exc:
                    raise ParseError(str(exc), sp) from exc
            try:
                features.append(Feature(r.str(f["name"], p + ".name"), tuple(steps)))
            except InvalidSpec as exc:
                raise ParseError(str(exc), p) from exc

        gd = d.get("guards") or {}
        gd = r.obj(gd, path + ".guards", set(), {"power_variable", "power_off_value", "lock_variable", "locked_value"})
        guards = Guards(
            r.str(gd.get("power_variable"), path + ".guards.power_variable", allow_none=True),
            r.str(gd.get("power_off_value", "off"), path + ".guards.power_off_value"),
            r.str(gd.get("lock_variable"), path + ".guards.lock_variable", allow_none=True),
            r.str(gd.get("locked_value", "locked"), path + ".guards.locked_value"),
        )
        pm = d.get("program_map")
        program_map = None
        if pm is not None:
            pm = r.obj(pm, path + ".program_map", {"selector", "placeholder", "bindings"})
            program_map = ProgramMap(
                r.str(pm["selector"], path + ".program_map.selector"),
                r.str(pm["placeholder"], path + ".program_map.placeholder"),
                r.pairs(pm["bindings"], path + ".program_map.bindings"),
            )
        reset = d.get("input_reset_on_switch", True)
        if not isinstance(reset, bool):
            raise ParseError("expected a boolean", path + ".input_reset_on_switch")
        cd = r.obj(d.get("cursor") or {"feature": "empty", "step": 1}, path + ".cursor", {"feature", "step"})
        cursor = FeatureCursor(r.str(cd["feature"], path + ".cursor.feature"), _int(cd["step"], path + ".cursor.step"))
        return ApplianceModel(tuple(variables), tuple(actions), tuple(features), guards, program_map, reset, cursor)
    except InvalidSpec as exc:
        raise ParseError(str(exc), path) from exc


def _decode(data: bytes | str) -> Any:
    if isinstance(data, bytes):
        try:
            data = data.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ParseError(f"not UTF-8: {exc}") from exc
    try:
        return json.loads(data, parse_float=Decimal)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, "$", exc.lineno) from exc


def _check_version(doc: Any) -> None:
    if not isinstance(doc, dict) or "schema_version" not in doc:
        raise ParseError("missing field(s) ['schema_version']", "$")
    if doc["schema_version"] not in SUPPORTED_VERSIONS:
        raise SchemaVersionUnsupported(f"unsupported schema version {doc['schema_version']!r}", "$.schema_version")


def model_document_to_json(doc: ModelDocument) -> dict:
    return {
        "schema_version": doc.schema_version,
        "provenance": {"kind": doc.provenance.kind, "note": doc.provenance.note},
        "model": model_to_json(doc.model),
    }


def save_model(doc: ModelDocument) -> bytes:
    return dumps(model_document_to_json(doc))


def load_model(data: bytes | str, *, strict: bool = True, check: bool = True) -> ModelDocument:
    """Parse a model document; with ``check`` the validator must report no errors."""
    raw = _decode(data)
    _check_version(raw)
    r = _Reader(strict)
    d = r.obj(raw, "$", {"schema_version", "model"}, {"provenance"})
    pv = r.obj(d.get("provenance") or {"kind": "ground_truth", "note": ""}, "$.provenance", {"kind"}, {"note"})
    if pv["kind"] not in PROVENANCE_KINDS:
        raise ParseError(f"provenance kind must be one of {PROVENANCE_KINDS}", "$.provenance.kind")
    model = model_from_json(d["model"], "$.model", strict)
    doc = ModelDocument(model, Provenance(pv["kind"], r.str(pv.get("note", ""), "$.provenance.note")), d["schema_version"])
    if check:
        from .validator import errors_only, validate

        errs = errors_only(validate(model))
        if errs:
            raise InvariantViolation(errs)
    return doc


# ---------------------------------------------------------------------------
# goals, policies and task suites


def goal_to_json(goal: GoalState) -> dict:
    return {
        "assignments": {k: v for k, v in goal.assignments},
        "range_overrides": {k: spec_to_json(s) for k, s in goal.range_overrides},
        "ignored": list(goal.ignored),
    }


def goal_from_json(data: Any, path: str, strict: bool = True, allow_empty: bool = False) -> GoalState:
    """Parse a goal; ``allow_empty`` defers the empty-goal check to the validator (V9)."""
    r = _Reader(strict)
    d = r.obj(data, path, {"assignments"}, {"range_overrides", "ignored"})
    a = d["assignments"]
    if not isinstance(a, dict):
        raise ParseError("expected an object of variable -> value", path + ".assignments")
    if not a and not allow_empty:
        raise ParseError("a goal must bind at least one variable", path + ".assignments")
    for k, v in a.items():
        r.str(v, f"{path}.assignments.{k}")
    ro = d.get("range_overrides") or {}
    if not isinstance(ro, dict):
        raise ParseError("expected an object", path + ".range_overrides")
    overrides = tuple((k, spec_from_json(s, f"{path}.range_overrides.{k}", r)) for k, s in ro.items())
    ignored = r.list(d.get("ignored", []), path + ".ignored")
    for i, x in enumerate(ignored):
        r.str(x, f"{path}.ignored[{i}]")
    return GoalState(tuple(a.items()), overrides, tuple(ignored))


def policy_to_json(policy: TaskPolicy) -> dict:
    return {"features": list(policy.features), "changing_variables": list(policy.changing_variables)}


def policy_from_json(data: Any, path: str, strict: bool = True) -> TaskPolicy:
    r = _Reader(strict)
    d = r.obj(data, path, {"features"}, {"changing_variables"})
    feats = r.list(d["features"], path + ".features")
    cv = r.list(d.get("changing_variables", []), path + ".changing_variables")
    for i, x in enumerate(feats):
        r.str(x, f"{path}.features[{i}]")
    for i, x in enumerate(cv):
        r.str(x, f"{path}.changing_variables[{i}]")
    return TaskPolicy(tuple(feats), tuple(cv))


def task_to_json(t: TaskDocument) -> dict:
    return {
        "instruction": t.instruction,
        "goal": goal_to_json(t.goal),
        "policy": None if t.policy is None else policy_to_json(t.policy),
        "optimal_execution_steps": t.optimal_execution_steps,
    }


def save_task_suite(tasks: list[TaskDocument] | tuple[TaskDocument, ...]) -> bytes:
    return dumps({"schema_version": SCHEMA_VERSION, "tasks": [task_to_json(t) for t in tasks]})


def load_task_suite(data: bytes | str, *, strict: bool = True) -> list[TaskDocument]:
    raw = _decode(data)
    _check_version(raw)
    r = _Reader(strict)
    d = r.obj(raw, "$", {"schema_version", "tasks"})
    out = []
    for i, t in enumerate(r.list(d["tasks"], "$.tasks")):
        p = f"$.tasks[{i}]"
        t = r.obj(t, p, {"instruction", "goal"}, {"policy", "optimal_execution_steps"})
        opt = t.get("optimal_execution_steps")
        if opt is not None:
            opt = _int(opt, p + ".optimal_execution_steps")
            if opt < 0:
                raise ParseError("must be non-negative", p + ".optimal_execution_steps")
        pol = t.get("policy")
        out.append(
            TaskDocument(
                r.str(t["instruction"], p + ".instruction"),
                goal_from_json(t["goal"], p + ".goal", strict),
                None if pol is None else policy_from_json(pol, p + ".policy", strict),
                opt,
            )
        )
    return out


# ---------------------------------------------------------------------------
# bundles

MANUAL_FILE = "manual.txt"
MODEL_FILE = "model.appliance.json"
TASKS_FILE = "tasks.tasks.json"


def load_bundle(directory: str | Path) -> FixtureBundle:
    d = Path(directory)
    model_doc = load_model((d / MODEL_FILE).read_bytes())
    tasks = load_task_suite((d / TASKS_FILE).read_bytes())
    if not tasks:
        raise ParseError("a bundle needs at least one task", str(d / TASKS_FILE))
    for i, t in enumerate(tasks):
        if t.policy is not None:
            for f in t.policy.features:
                if f not in model_doc.model.feature_map:
                    raise ParseError(f"policy names unknown feature {f!r}", f"$.tasks[{i}].policy.features")
    return FixtureBundle(d.name, (d / MANUAL_FILE).read_text(encoding="utf-8"), model_doc, tuple(tasks))


def load_bundles(root: str | Path) -> list[FixtureBundle]:
    """Every bundle directory directly under ``root``, sorted by name."""
    root = Path(root)
    if (root / MODEL_FILE).exists():
        return [load_bundle(root)]
    return [load_bundle(p) for p in sorted(root.iterdir()) if (p / MODEL_FILE).exists()]


def fixtures_root() -> Path:
    return Path(__file__).parent / "fixtures"
