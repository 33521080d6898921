import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import apsp
from walkdrive.instance import (
    GeneratorParams,
    InstanceError,
    MobilityConfig,
    Mode,
    Site,
    apply_transfer_times,
    build_instance,
    enforce_triangle_inequality,
    expand_time_windows,
    generate_synthetic,
    haversine_km,
    is_metric,
    load_instance,
    parse_instance,
    preferred_mode_for_times,
    save_instance,
    synthetic_document,
)

MOB = MobilityConfig()


def chord_km(p, q):
    """Great-circle distance via the 3-D chord between unit vectors."""
    def unit(lat, lon):
        lat, lon = math.radians(lat), math.radians(lon)
        return np.array([math.cos(lat) * math.cos(lon), math.cos(lat) * math.sin(lon), math.sin(lat)])
    chord = np.linalg.norm(unit(*p) - unit(*q))
    return 2 * 6371.0 * math.asin(min(1.0, chord / 2))


@given(st.floats(-80, 80), st.floats(-179, 179), st.floats(-80, 80), st.floats(-179, 179))
def test_haversine_agrees_with_chord_formula(lat1, lon1, lat2, lon2):
    assert haversine_km((lat1, lon1), (lat2, lon2)) == pytest.approx(chord_km((lat1, lon1), (lat2, lon2)),
                                                                        rel=1e-9, abs=1e-6)


def test_walking_speed_maps_max_distance_to_max_time():
    # 2.5 km at 5 km/h.
    assert 2.5 / 5.0 * 60 == MOB.max_walking_time


@pytest.mark.parametrize(("tw", "td", "mode"), [
    (35, 10, Mode.DRIVE),  # too far to walk
    (20, 5, Mode.WALK),  # car trip too short to be worth it
    (20, 25, Mode.WALK),
    (25, 20, Mode.DRIVE),
    (30, 30, Mode.WALK),
])
def test_preferred_mode_rules(tw, td, mode):
    assert preferred_mode_for_times(tw, td, MOB) is mode


@settings(max_examples=50, deadline=None)
@given(st.integers(2, 9).flatmap(lambda n: st.lists(
    st.lists(st.integers(1, 50), min_size=n, max_size=n), min_size=n, max_size=n)))
def test_triangle_closure_equals_shortest_paths(rows):
    m = np.array(rows, dtype=float)
    np.fill_diagonal(m, 0)
    closed = enforce_triangle_inequality(m)
    assert np.array_equal(closed, apsp(m))
    assert is_metric(closed)
    assert np.array_equal(enforce_triangle_inequality(closed), closed)


def test_transfer_folding_adds_pickup_and_parking_off_diagonal():
    d = np.array([[0, 4.0], [7.0, 0]])
    out = apply_transfer_times(d, MobilityConfig(pickup_time=5, parking_time=10))
    assert out.tolist() == [[0, 19.0], [22.0, 0]]


def test_window_expansion_counts_and_groups():
    sites = [
        Site(0, 0, 0, 0, 0, ((), ()), 0),
        Site(1, 0, 0, 5, 10, (((0, 60), (120, 200)), ((30, 90),)), 1),
        Site(2, 0, 0, 3, 10, ((), ((0, 500),)), 2),
    ]
    pois = expand_time_windows(sites, days=2)
    assert len(pois) == 2 + 1 + 1
    assert [(p.location, p.day, p.window) for p in pois] == [(1, 0, 0), (1, 0, 1), (1, 1, 0), (2, 1, 0)]
    assert {p.group_id for p in pois if p.location == 1} == {1}


def test_dummies_and_preference_matrix():
    inst = generate_synthetic(6, 0, GeneratorParams(days=3))
    assert inst.start_ids == (0, 2, 4) and inst.end_ids == (1, 3, 5)
    for d in range(3):
        s, e = inst.pois[inst.start_ids[d]], inst.pois[inst.end_ids[d]]
        assert (s.open, s.close, e.open, e.close) == (0, 0, 0, inst.c_max)
        assert s.location == e.location == inst.start_site
    # Exactly one preferred mode per pair, consistent with the scalar rule.
    w, d = inst.matrices.walk, inst.matrices.drive
    for a in range(inst.n_sites):
        for b in range(inst.n_sites):
            mode = preferred_mode_for_times(w[a, b], d[a, b], inst.mobility)
            assert inst.walk_preferred[a, b] == (mode is Mode.WALK)


def test_generator_is_deterministic_and_metric(tmp_path):
    params = GeneratorParams(days=2)
    a = save_instance(synthetic_document(40, 7, params), tmp_path / "a.json").read_bytes()
    b = save_instance(synthetic_document(40, 7, params), tmp_path / "b.json").read_bytes()
    assert a == b
    inst = load_instance(tmp_path / "a.json")
    assert is_metric(inst.matrices.walk)
    raw = synthetic_document(40, 7, params)
    assert is_metric(np.asarray(raw["drive_minutes"]))


def test_sidecar_matrices_round_trip(tmp_path):
    doc = synthetic_document(12, 3, GeneratorParams(days=1))
    path = save_instance(doc, tmp_path / "x.json", inline=False)
    on_disk = json.loads(path.read_text())
    assert on_disk["walk_minutes"] == "x.walk.npy"
    a = load_instance(path)
    b = parse_instance(doc)
    assert np.array_equal(a.matrices.walk, b.matrices.walk)
    assert a.digest == b.digest


@pytest.mark.parametrize(("mutate", "message"), [
    (lambda d: d["pois"].append(dict(d["pois"][1])), "duplicate"),
    (lambda d: d["pois"][1].update(score=-1), "negative score"),
    (lambda d: d["pois"][1].update(windows=[[50, 10]]), "window"),
    (lambda d: d.update(walk_minutes=[[0, 1], [1, 0]]), "shape"),
    (lambda d: d.update(start=999), "start"),
    (lambda d: d.pop("drive_minutes"), "missing"),
])
def test_invalid_documents_are_rejected(mutate, message):
    doc = synthetic_document(3, 1, GeneratorParams(days=1))
    doc["walk_minutes"] = np.asarray(doc["walk_minutes"]).tolist()
    doc["drive_minutes"] = np.asarray(doc["drive_minutes"]).tolist()
    mutate(doc)
    with pytest.raises(InstanceError, match=message):
        parse_instance(doc)


def test_non_metric_input_is_closed_on_load():
    sites = [Site(k, 0, 0, 1, 0, (((0, 100),),), k) for k in range(3)]
    walk = np.array([[0, 1, 10], [1, 0, 1], [10, 1, 0]], dtype=float)
    inst = build_instance(sites, walk, walk, MOB, days=1, c_max=100)
    assert inst.matrices.walk[0, 2] == 2
    assert not inst.matrices.walk.flags.writeable
