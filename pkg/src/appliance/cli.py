"""Command-line entry point: ``appliance <subcommand> ...``.

Exit codes: 0 success, 1 validation errors, 2 parse/schema or usage errors,
3 episode failure, 4 extraction backend failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Sequence

from .bench import parse_perturbations, run_suite, save_report
from .compiler import compile_plan
from .errors import (
    ApplianceError,
    BackendUnavailable,
    ExtractionFailed,
    InvariantViolation,
    ParseError,
    PlanningError,
    UnknownAction,
)
from .executor import episode_to_json, run_episode
from .schema import (
    SCHEMA_VERSION,
    ModelDocument,
    TaskDocument,
    dumps,
    goal_to_json,
    load_bundles,
    load_model,
    load_task_suite,
    model_document_to_json,
    policy_to_json,
    save_model,
)
from .simulator import Simulator
from .validator import Diagnostic, errors_only, validate, validate_goal

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_PARSE = 2
EXIT_EPISODE = 3
EXIT_BACKEND = 4


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on usage errors already; keep the synopsis on stderr
    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(EXIT_PARSE, f"{self.prog}: error: {message}\n")


def _emit(args, payload, human: str) -> None:
    if args.json:
        sys.stdout.write(json.dumps(payload, sort_keys=True, indent=2, ensure_ascii=False) + "\n")
    else:
        sys.stdout.write(human if human.endswith("\n") or not human else human + "\n")


def _read(path: str) -> bytes:
    try:
        return Path(path).read_bytes()
    except OSError as exc:
        raise ParseError(f"cannot read file: {exc.strerror}", path) from exc


def _load_model_unchecked(path: str) -> ModelDocument:
    return load_model(_read(path), check=False)


def _select_tasks(tasks: list[TaskDocument], index: int | None) -> list[tuple[int, TaskDocument]]:
    if index is None:
        return list(enumerate(tasks))
    if not 0 <= index < len(tasks):
        raise ParseError(f"task index {index} out of range (0..{len(tasks) - 1})", "--task")
    return [(index, tasks[index])]


# ---------------------------------------------------------------------------
# subcommands


def cmd_validate(args) -> int:
    doc = _load_model_unchecked(args.model)
    diags = validate(doc.model)
    if args.tasks:
        for i, t in enumerate(load_task_suite(_read(args.tasks))):
            for d in validate_goal(doc.model, t.goal, t.policy):
                diags.append(Diagnostic(d.code, d.severity, f"tasks[{i}].{d.subject}", d.message))
    errs = errors_only(diags)
    human = "\n".join(f"{d.severity.upper():7} {d.code} {d.subject}: {d.message}" for d in diags)
    human += ("\n" if human else "") + ("INVALID" if errs else "OK")
    _emit(args, {"valid": not errs, "diagnostics": [d.as_dict() for d in diags]}, human)
    return EXIT_INVALID if errs else EXIT_OK


def cmd_simulate(args) -> int:
    doc = load_model(_read(args.model))
    if args.interactive:
        sim = Simulator(doc.model)
        sim.reset()
        for line in sys.stdin:
            parts = [p.strip() for p in line.split(",")]
            if not parts[0]:
                continue
            try:
                obs = sim.step(parts[0], int(parts[1]) if len(parts) > 1 and parts[1] else 1)
            except UnknownAction as exc:
                sys.stdout.write(f"! {exc}\n")
                continue
            sys.stdout.write(obs.raw or "(no change)\n")
            sys.stdout.flush()
        return EXIT_OK
    script = _read(args.script).decode("utf-8")
    sim = Simulator(doc.model)
    observations = [sim.reset()]
    for lineno, line in enumerate(script.splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = [p.strip() for p in line.split(",")]
        try:
            times = int(parts[1]) if len(parts) > 1 and parts[1] else 1
            duration = parts[2] if len(parts) > 2 and parts[2] else None
            observations.append(sim.step(parts[0], times, None if duration is None else _decimal(duration)))
        except (ValueError, UnknownAction) as exc:
            raise ParseError(f"bad script line {line!r}: {exc}", args.script, lineno) from exc
    raw = "".join(o.raw for o in observations)
    payload = {"observations": [o.raw for o in observations[1:]], "display": sim.render_display()}
    _emit(args, payload, raw)
    return EXIT_OK


def _decimal(text: str):
    from decimal import Decimal, InvalidOperation

    try:
        return Decimal(text)
    except InvalidOperation as exc:
        raise ValueError(f"not a duration: {text!r}") from exc


def cmd_plan(args) -> int:
    doc = load_model(_read(args.model))
    tasks = load_task_suite(_read(args.tasks))
    out, lines = [], []
    for i, t in _select_tasks(tasks, args.task):
        if t.policy is None:
            raise ParseError("task has no policy", f"tasks[{i}].policy")
        plan = compile_plan(doc.model, t.policy, t.goal)
        macros = [
            {
                "feature": m.feature,
                "actions": [[a, n] + ([str(d)] if d is not None else []) for a, n, d in m.actions],
                "expected": dict(m.expected),
            }
            for m in plan.macros
        ]
        out.append({"task": i, "instruction": t.instruction, "press_count": plan.press_count, "macros": macros})
        lines.append(f"[{i}] {t.instruction}  ({plan.press_count} presses)")
        for m in plan.macros:
            acts = ", ".join(f"{a} x{n}" for a, n, _ in m.actions) or "(nothing to press)"
            lines.append(f"    {m.feature}: {acts}")
    _emit(args, {"plans": out}, "\n".join(lines))
    return EXIT_OK


def _backend(args):
    from .extractor import HttpBackend, HttpConfig, MockBackend
    from .schema import fixtures_root

    if args.backend == "mock":
        return MockBackend(args.fixtures or fixtures_root())
    if not args.config:
        raise BackendUnavailable("--backend http needs --config")
    try:
        cfg = HttpConfig.load(args.config)
    except (OSError, ValueError, TypeError) as exc:
        raise BackendUnavailable(f"bad config {args.config}: {exc}") from exc
    return HttpBackend(cfg)


def cmd_extract(args) -> int:
    from .extractor import ExtractionRequest, extract_goal_with_validation, extract_with_validation

    manual = _read(args.manual).decode("utf-8")
    panel = tuple(p.strip() for p in args.panel.split(",")) if args.panel else ()
    try:
        request = ExtractionRequest(manual, args.instruction, panel)
    except ValueError as exc:
        raise ParseError(str(exc), args.manual) from exc
    backend = _backend(args)
    doc = extract_with_validation(backend, request, args.attempts)
    payload = model_document_to_json(doc)
    if args.instruction:
        policy, goal = extract_goal_with_validation(backend, doc.model, args.instruction, args.attempts)
        payload = {"model_document": payload, "task_policy": policy_to_json(policy), "goal_state": goal_to_json(goal)}
    if args.out:
        Path(args.out).write_bytes(save_model(doc))
    human = f"extracted {len(doc.model.variables)} variables, {len(doc.model.features)} features ({doc.provenance.note})"
    if args.instruction:
        human += "\n" + "goal: " + ", ".join(f"{k}={v}" for k, v in goal.assignments)
        human += "\n" + "features: " + ", ".join(policy.features)
    if args.out:
        human += f"\nwrote {args.out}"
    _emit(args, payload, human)
    return EXIT_OK


def cmd_run(args) -> int:
    belief = load_model(_read(args.belief)).model
    truth = load_model(_read(args.truth)).model
    tasks = load_task_suite(_read(args.tasks))
    results, lines, ok = [], [], True
    for i, t in _select_tasks(tasks, args.task):
        if t.policy is None:
            raise ParseError("task has no policy", f"tasks[{i}].policy")
        res = run_episode(belief, Simulator(truth), t.policy, t.goal, args.budget, repair=not args.no_repair)
        ok &= res.success
        entry = episode_to_json(res)
        entry["task"] = i
        entry["instruction"] = t.instruction
        results.append(entry)
        status = "ok" if res.success else f"FAILED ({res.failure})"
        lines.append(
            f"[{i}] {status}: {res.reasoning_steps} reasoning, {res.execution_steps} execution steps, "
            f"{len(res.repairs)} repair(s)  {t.instruction}"
        )
        if args.verbose:
            for r in res.trace.records:
                obs = r.observation.raw.strip().replace("\n", "; ") or "-"
                lines.append(f"      {r.step_index:3} {r.phase.value:7} {r.action} x{r.times}  -> {obs}")
    if args.trace:
        Path(args.trace).write_bytes(dumps({"schema_version": SCHEMA_VERSION, "episodes": results}))
        lines.append(f"wrote {args.trace}")
    _emit(args, {"episodes": results}, "\n".join(lines))
    return EXIT_OK if ok else EXIT_EPISODE


def cmd_bench(args) -> int:
    bundles = load_bundles(args.fixtures)
    if not bundles:
        raise ParseError("no fixture bundles found", args.fixtures)
    try:
        perts = parse_perturbations(args.perturbations)
    except ValueError as exc:
        raise ParseError(str(exc), "--perturbations") from exc
    report = run_suite(bundles, perts, args.budget, args.jobs, seed=args.seed, repair=not args.no_repair)
    data = save_report(report)
    if args.out:
        Path(args.out).write_bytes(data)
    lines = [f"{'perturbation':26} {'n':>4} {'SR':>6} {'SPL':>6} {'reason':>7} {'exec':>7}"]
    for label, agg in report["aggregates"]["by_perturbation"].items():
        lines.append(
            f"{label:26} {agg['n']:>4} {agg['SR']:>6.3f} {agg['SPL']:>6.3f} "
            f"{agg['avg_reasoning_steps']:>7.2f} {agg['avg_execution_steps']:>7.2f}"
        )
    ids = report["identities"]
    lines.append("identities: " + ", ".join(f"{k}={'ok' if v else 'VIOLATED'}" for k, v in ids.items()))
    if args.out:
        lines.append(f"wrote {args.out}")
    if args.json:
        sys.stdout.write(data.decode("utf-8"))
    else:
        sys.stdout.write("\n".join(lines) + "\n")
    return EXIT_OK if all(ids.values()) else EXIT_INVALID


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--json", action="store_true", help="machine-readable output")
    common.add_argument("-v", "--verbose", action="store_true")

    p = _Parser(prog="appliance", description="Model, plan and operate appliances from their manuals.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("validate", parents=[common], help="check a model (and optionally a task suite)")
    s.add_argument("model")
    s.add_argument("--tasks", help="task suite whose goals are checked against the model")
    s.set_defaults(func=cmd_validate)

    s = sub.add_parser("simulate", parents=[common], help="replay an action script against a model")
    s.add_argument("model")
    g = s.add_mutually_exclusive_group(required=True)
    g.add_argument("--script", help="file of action[,times[,duration]] lines")
    g.add_argument("--interactive", action="store_true", help="read actions from stdin (debugging aid)")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("plan", parents=[common], help="compile the press sequence for tasks")
    s.add_argument("model")
    s.add_argument("--tasks", required=True)
    s.add_argument("--task", type=int, help="index of a single task")
    s.set_defaults(func=cmd_plan)

    s = sub.add_parser("extract", parents=[common], help="build a model (and goal) from a manual")
    s.add_argument("manual")
    s.add_argument("--backend", choices=("mock", "http"), default="mock")
    s.add_argument("--config", help="JSON config for the http backend")
    s.add_argument("--fixtures", help="bundle directory for the mock backend")
    s.add_argument("--instruction", help="also extract a goal for this instruction")
    s.add_argument("--panel", help="comma-separated panel element names")
    s.add_argument("--attempts", type=int, default=3)
    s.add_argument("--out", help="write the model document here")
    s.set_defaults(func=cmd_extract)

    s = sub.add_parser("run", parents=[common], help="run closed-loop episodes against a ground-truth simulator")
    s.add_argument("--belief", required=True)
    s.add_argument("--truth", required=True)
    s.add_argument("--tasks", required=True)
    s.add_argument("--task", type=int)
    s.add_argument("--budget", type=int, default=25)
    s.add_argument("--no-repair", action="store_true")
    s.add_argument("--trace", help="write the episodes as a .trace.json document")
    s.set_defaults(func=cmd_run)

    s = sub.add_parser("bench", parents=[common], help="run the fault-injection benchmark")
    s.add_argument("fixtures")
    s.add_argument("--perturbations", default="all", help="all, none, or e.g. wrong_step:3,wrong_direction")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--jobs", type=int, default=1)
    s.add_argument("--budget", type=int, default=25)
    s.add_argument("--no-repair", action="store_true")
    s.add_argument("--out")
    s.set_defaults(func=cmd_bench)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except InvariantViolation as exc:
        _emit(args, {"error": str(exc), "codes": exc.codes}, f"error: {exc}")
        return EXIT_INVALID
    except PlanningError as exc:
        _emit(args, {"error": str(exc), "feature": exc.feature}, f"planning error: {exc}")
        return EXIT_INVALID
    except (ExtractionFailed, BackendUnavailable) as exc:
        diags = [d.as_dict() for d in getattr(exc, "diagnostics", [])]
        _emit(args, {"error": str(exc), "diagnostics": diags}, f"extraction error: {exc}")
        return EXIT_BACKEND
    except ParseError as exc:
        _emit(args, {"error": str(exc), "path": exc.path, "line": exc.line}, f"parse error: {exc}")
        return EXIT_PARSE
    except ApplianceError as exc:
        _emit(args, {"error": str(exc)}, f"error: {exc}")
        return EXIT_PARSE


if __name__ == "__main__":
    sys.exit(main())
