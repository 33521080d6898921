import copy

import pytest

from walkdrive.encoding import Solution, solution_to_dict
from walkdrive.instance import GeneratorParams, generate_synthetic
from walkdrive.search import IlsConfig, solve
from walkdrive.validate import validate_solution


@pytest.fixture(scope="module")
def solved():
    inst = generate_synthetic(40, 3, GeneratorParams(lat_range=(41.0, 41.06), lon_range=(16.8, 16.88), days=2))
    result = solve(inst, IlsConfig(max_iter_no_improve=30), radius_km=5.0, clustering=True)
    return inst, solution_to_dict(result.solution, inst), result.space.assignment


def test_worked_example_passes_without_violations(worked):
    inst, itin = worked
    sol = Solution(itineraries=[itin])
    sol.refresh_totals(inst)
    rep = validate_solution(inst, solution_to_dict(sol, inst))
    assert rep.ok, rep.errors
    assert rep.score == 80
    assert rep.routed == 8 and rep.subtours == 2
    assert rep.violations == 0


def test_solver_output_passes(solved):
    inst, doc, assignment = solved
    rep = validate_solution(inst, doc, assignment)
    assert rep.ok, rep.errors
    assert rep.score == doc["totals"]["score"] > 0
    horizon = 2 * inst.c_max
    assert rep.drive_minutes + rep.walk_minutes + rep.visit_minutes + rep.wait_minutes <= horizon + 1e-6


def busy_day(doc):
    return next(d for d in doc["days"] if len(d["visits"]) > 3)


@pytest.mark.parametrize(("corrupt", "needle"), [
    (lambda d: busy_day(d)["visits"][1].update(arrival=busy_day(d)["visits"][1]["arrival"] + 1), "arrival"),
    (lambda d: busy_day(d)["visits"][1].update(start=1e6), "start"),
    (lambda d: busy_day(d)["visits"][1].update(mode_to_next=None), "mode"),
    (lambda d: busy_day(d)["visits"].insert(2, dict(busy_day(d)["visits"][1])), "max-n"),
    (lambda d: busy_day(d)["visits"][1].update(poi_id=-5), "not available"),
    (lambda d: d["totals"].update(score=d["totals"]["score"] + 1), "totals: score"),
    (lambda d: busy_day(d).update(violations=busy_day(d)["violations"] + 1), "violated arcs"),
    (lambda d: d.update(instance="0" * 16), "instance"),
    (lambda d: busy_day(d)["visits"].pop(0), "start dummy"),
])
def test_corruptions_are_named(solved, corrupt, needle):
    inst, doc, assignment = solved
    bad = copy.deepcopy(doc)
    corrupt(bad)
    rep = validate_solution(inst, bad, assignment)
    assert not rep.ok
    assert any(needle in e for e in rep.errors), rep.errors


def test_overlong_day_fails(worked):
    inst, itin = worked
    sol = Solution(itineraries=[itin])
    sol.refresh_totals(inst)
    doc = solution_to_dict(sol, inst)
    inst2 = copy.copy(inst)
    object.__setattr__(inst2, "c_max", 100.0)
    rep = validate_solution(inst2, doc)
    assert any("c_max" in e or "window" in e for e in rep.errors)
