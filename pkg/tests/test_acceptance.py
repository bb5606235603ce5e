"""Acceptance suite: one PASS/FAIL line per criterion, printed even under capture."""

import random
import time

import pytest

from appliance.bench import DEFAULT_PERTURBATIONS, run_suite, save_report
from appliance.compiler import compile_adjustment
from appliance.errors import TargetUnreachable
from appliance.executor import explore_cycle, infer_spec, run_episode
from appliance.model import Phase
from appliance.schema import ModelDocument, Provenance, fixtures_root, load_bundles, load_model, save_model
from appliance.simulator import Simulator
from appliance.validator import validate
from appliance.values import ContinuousSpec, DiscreteSpec, value_lattice
from helpers import (
    DIAL,
    DIAL_BELIEF,
    basic_dehumidifier,
    bfs_presses,
    crafted_validator_cases,
    dial_model,
    goal,
    policy,
    random_model,
    random_spec,
    timer_model,
)


@pytest.fixture
def report(capsys):
    def emit(number: int, title: str, ok: bool, started: float, limit: float | None = None, detail: str = ""):
        elapsed = time.perf_counter() - started
        in_time = limit is None or elapsed < limit
        verdict = "PASS" if ok and in_time else "FAIL"
        budget = f" (limit {limit:g}s)" if limit is not None else ""
        with capsys.disabled():
            print(f"\nACCEPTANCE {number}: {verdict}  {title}  [{elapsed:.2f}s{budget}] {detail}".rstrip())
        assert ok, detail
        assert in_time, f"took {elapsed:.2f}s, limit {limit}s"

    return emit


@pytest.fixture(scope="module")
def bundles():
    return load_bundles(fixtures_root())


@pytest.fixture(scope="module")
def suite_runs(bundles):
    t0 = time.perf_counter()
    runs = {
        "truth": run_suite(bundles),
        "repair": run_suite(bundles, list(DEFAULT_PERTURBATIONS), jobs=4),
        "no_repair": run_suite(bundles, list(DEFAULT_PERTURBATIONS), jobs=4, repair=False),
    }
    return runs, time.perf_counter() - t0


def test_1_validator_completeness(report):
    t0 = time.perf_counter()
    cases = crafted_validator_cases()
    hits = {code: sorted({d.code for d in validate(m, g)}) for code, (m, g) in cases.items()}
    clean = validate(basic_dehumidifier())
    ok = len(cases) == 9 and all(hits[c] == [c] for c in cases) and clean == []
    report(1, "validator: nine crafted cases hit exactly their rule, reference model clean", ok, t0, 1.0, str(hits) if not ok else "")


def test_2_compiler_matches_bfs(report):
    t0 = time.perf_counter()
    rng = random.Random(20240601)
    checked = mismatches = 0
    while checked < 1000:
        spec = random_spec(rng)
        lat = value_lattice(spec)
        if len(lat) > 50:
            continue
        fwd, bwd = rng.random() < 0.75, rng.random() < 0.75
        c, t = rng.randrange(len(lat)), rng.randrange(len(lat))
        expect = bfs_presses(len(lat), spec.cyclic, c, t, fwd, bwd)
        try:
            got = compile_adjustment(spec, lat[c], lat[t], "f" if fwd else None, "b" if bwd else None)[1]
        except TargetUnreachable:
            got = None
        mismatches += got != expect
        checked += 1
    report(2, "compile_adjustment equals BFS on 1000 random cases", mismatches == 0, t0, 10.0, f"{mismatches} mismatches")


def test_3_wraparound_inference(report):
    t0 = time.perf_counter()
    seq = explore_cycle(Simulator(timer_model()), "press_plus", "0", "timer")
    spec = infer_spec(seq)
    report(3, "0-60 timer exploration infers Continuous [(0,60,10)]", spec == ContinuousSpec(((0, 60, 10),)), t0, None, str(spec))


def test_4_dial_replay(report):
    t0 = time.perf_counter()
    r = run_episode(
        dial_model(DIAL_BELIEF), Simulator(dial_model(DIAL)), policy("adjust_function"),
        goal(variable_function="Lower & upper heater"),
    )
    explore = sum(t.times for t in r.trace.records if t.phase is Phase.EXPLORE)
    ok = r.success and len(r.repairs) == 1 and r.repairs[0].new_spec == DiscreteSpec(DIAL) and explore <= 2 * 7 + 1
    report(4, "wrong dial order repaired in one round to the true 7-value cycle", ok, t0, None, f"exploration steps {explore}")


def test_5_truth_belief_is_perfect(report, bundles, suite_runs):
    t0 = time.perf_counter()
    rep = run_suite(bundles)
    a = rep["aggregates"]["all"]
    size_ok = len(bundles) >= 6 and all(len(b.tasks) >= 5 for b in bundles)
    ok = size_ok and a["SR"] == 1.0 and a["SPL"] == 1.0
    report(5, "belief == truth: SR = SPL = 1.0 on the full fixture suite", ok, t0, 30.0, f"{len(bundles)} bundles, n={a['n']}")


def test_6_repair_dominates(report, suite_runs):
    runs, elapsed = suite_runs
    t0 = time.perf_counter() - elapsed
    on = runs["repair"]["aggregates"]["by_perturbation"]
    off = runs["no_repair"]["aggregates"]["by_perturbation"]
    rows = {lab: (on[lab]["SR"], off[lab]["SR"], on[lab]["n"]) for lab in on}
    ok = bool(rows) and all(n > 0 and sr_on == 1.0 and sr_on > sr_off for sr_on, sr_off, n in rows.values())
    detail = "; ".join(f"{lab} {a:.2f}>{b:.2f} (n={n})" for lab, (a, b, n) in rows.items())
    report(6, "repair beats no-repair for every fault class, SR with repair = 1.0", ok, t0, 120.0, detail)


def test_7_metric_identities(report, suite_runs):
    runs, _ = suite_runs
    t0 = time.perf_counter()
    bad = {name: k for name, rep in runs.items() for k, v in rep["identities"].items() if not v}
    report(7, "SPL <= SR, SPL = SR iff all successes optimal, execution >= optimal", not bad, t0, None, str(bad) if bad else "")


def test_8_round_trip_and_determinism(report, bundles):
    t0 = time.perf_counter()
    rng = random.Random(8)
    failures = 0
    for i in range(500):
        m = random_model(rng)
        data = save_model(ModelDocument(m, Provenance("perturbed", f"case {i}")))
        doc = load_model(data)
        failures += doc.model != m or save_model(doc) != data
    perts = list(DEFAULT_PERTURBATIONS)
    first = save_report(run_suite(bundles, perts, seed=11))
    second = save_report(run_suite(bundles, perts, seed=11))
    ok = failures == 0 and first == second
    report(8, "500 random models round-trip; two serial suite runs are byte-identical", ok, t0, 20.0,
           f"{failures} round-trip failures, reports identical={first == second}")
