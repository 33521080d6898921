import csv
import io
import math

import pytest

from walkdrive.bench import BenchConfig, aggregate, dev_pct, markdown_table, records_csv, run_bench, shares
from walkdrive.instance import GeneratorParams, save_instance, synthetic_document
from walkdrive.search import IlsConfig
from walkdrive.validate import ValidationReport


def test_dev_formula():
    assert dev_pct(90, 100) == pytest.approx(10.0)
    assert dev_pct(100, 100) == 0.0
    assert dev_pct(0, 0) == 0.0


def test_shares_are_percent_of_horizon():
    rep = ValidationReport(drive_minutes=72, walk_minutes=36, visit_minutes=180, wait_minutes=12)
    got = shares(rep, days=1, c_max=720)
    assert got == {"drive_share": 10.0, "walk_share": 5.0, "visit_share": 25.0, "wait_share": 100 * 12 / 720}


@pytest.fixture(scope="module")
def bench_run(tmp_path_factory):
    d = tmp_path_factory.mktemp("inst")
    params = GeneratorParams(lat_range=(41.0, 41.1), lon_range=(16.8, 16.95), days=3)
    for seed in (1, 2):
        save_instance(synthetic_document(30, seed, params), d / f"syn{seed}.json")
    (d / "broken.json").write_text("{not json")
    configs = [BenchConfig(1, 3.0, True), BenchConfig(1, math.inf, False), BenchConfig(2, math.inf, False)]
    records, skipped = run_bench(sorted(d.glob("*.json")), configs, ils=IlsConfig(max_iter_no_improve=20))
    return records, skipped


def test_bench_records_are_valid_and_consistent(bench_run):
    records, skipped = bench_run
    assert len(skipped) == 1 and "broken" in skipped[0]
    assert len(records) == 6
    for r in records:
        assert r.valid and r.violations >= 0
        assert 0 <= r.dev_pct <= 100
        assert r.drive_share + r.walk_share + r.visit_share + r.wait_share <= 100 + 1e-9
    for inst in ("syn1", "syn2"):
        day1 = [r for r in records if r.instance == inst and r.days == 1]
        best = max(r.score for r in day1)
        assert min(r.dev_pct for r in day1) == 0.0
        for r in day1:
            assert r.dev_pct == pytest.approx(100 * (best - r.score) / best)


def test_aggregate_and_tables(bench_run):
    records, _ = bench_run
    rows = aggregate(records)
    assert [(r["m"], r["r"], r["clustering"]) for r in rows] == [(1, 3.0, True), (1, math.inf, False),
                                                                (2, math.inf, False)]
    assert all(r["runs"] == 2 for r in rows)
    table = markdown_table(rows)
    assert table.count("\n") == 2 + len(rows)
    parsed = list(csv.DictReader(io.StringIO(records_csv(records))))
    assert len(parsed) == len(records)
