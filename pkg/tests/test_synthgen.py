import csv
import filecmp

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from v2v_encounters.encounters import find_encounters
from v2v_encounters.features import extract_features
from v2v_encounters.geo import haversine_array
from v2v_encounters.ingest import RegionBounds, collect_inputs, continuity_check, parse_trip_files, region_filter
from v2v_encounters.matcher import sort_trips, sweep_match
from v2v_encounters.synthgen import ENCOUNTER_KINDS, KINDS, ScenarioSpec, generate_corpus, generate_pair, random_spec


def encounters_of(a, b):
    pairs, _ = sweep_match(sort_trips([a, b]))
    return find_encounters(pairs, [a, b])[0]


def aligned_distance(a, b):
    lo, hi = max(a.start_time, b.start_time), min(a.end_time, b.end_time)
    ia, ib = slice(lo - a.start_time, hi - a.start_time + 1), slice(lo - b.start_time, hi - b.start_time + 1)
    return haversine_array(a.lat[ia], a.lon[ia], b.lat[ib], b.lon[ib])


def test_car_following_one_parallel_encounter():
    spec = ScenarioSpec("car_following", duration=60, speeds=(15, 15), lateral_offset=30, seed=1)
    a, b, label = generate_pair(spec)
    (enc,) = encounters_of(a, b)
    assert label == "car_following"
    assert enc.n_samples >= 50
    np.testing.assert_allclose(extract_features(enc).theta, 0.0, atol=1.0)


def test_intersection_close_perpendicular():
    spec = ScenarioSpec("intersection", duration=40, speeds=(12, 12), lateral_offset=5, seed=2)
    a, b, _ = generate_pair(spec)
    (enc,) = encounters_of(a, b)
    assert enc.min_distance <= 10.0
    np.testing.assert_allclose(extract_features(enc).theta, 90.0, atol=1.0)


def test_non_encounter_yields_nothing():
    spec = ScenarioSpec("non_encounter", duration=200, speeds=(12, 12), lateral_offset=1500, seed=3)
    a, b, _ = generate_pair(spec)
    assert encounters_of(a, b) == []


def test_car_following_gap_without_noise():
    spec = ScenarioSpec("car_following", speeds=(14, 14), lateral_offset=37.5, noise_sigma=0, heading=33)
    a, b, _ = generate_pair(spec)
    np.testing.assert_allclose(aligned_distance(a, b), 37.5, atol=0.01)


def test_by_passing_closest_approach_is_offset():
    spec = ScenarioSpec("by_passing", speeds=(10, 12), lateral_offset=5.0, noise_sigma=0, heading=200)
    a, b, _ = generate_pair(spec)
    d = aligned_distance(a, b)
    assert d.min() == pytest.approx(5.0, abs=0.01)
    np.testing.assert_allclose(extract_features(encounters_of(a, b)[0]).theta, 180.0, atol=0.01)


def test_intersection_centre_tick_offset():
    spec = ScenarioSpec("intersection", duration=40, speeds=(9, 13), lateral_offset=7.0, noise_sigma=0)
    a, b, _ = generate_pair(spec)
    centre = spec.start_time + 200
    ia, ib = centre - a.start_time, centre - b.start_time
    got = haversine_array(a.lat[ia], a.lon[ia], b.lat[ib], b.lon[ib])
    assert float(got) == pytest.approx(7.0, abs=0.01)


@given(seed=st.integers(0, 10_000))
def test_non_encounter_stays_apart(seed):
    spec = random_spec("non_encounter", np.random.default_rng(seed), noise_sigma=0.0)
    a, b, _ = generate_pair(spec)
    assert aligned_distance(a, b).min() >= spec.lateral_offset - 1.0


@given(kind=st.sampled_from(KINDS), seed=st.integers(0, 10_000))
def test_pairs_are_continuous_and_overlap(kind, seed):
    a, b, label = generate_pair(random_spec(kind, np.random.default_rng(seed)))
    assert label == kind
    assert continuity_check(a) and continuity_check(b)
    assert a.start_time <= b.end_time and b.start_time <= a.end_time
    if kind in ENCOUNTER_KINDS:
        assert len(encounters_of(a, b)) >= 1


def test_generate_pair_deterministic():
    spec = ScenarioSpec("by_passing", seed=99)
    (a1, b1, _), (a2, b2, _) = generate_pair(spec), generate_pair(spec)
    np.testing.assert_array_equal(a1.lat, a2.lat)
    np.testing.assert_array_equal(b1.lon, b2.lon)


def test_spec_validation():
    with pytest.raises(ValueError):
        ScenarioSpec("drifting")
    with pytest.raises(ValueError):
        ScenarioSpec("car_following", duration=5)
    with pytest.raises(ValueError):
        ScenarioSpec("non_encounter", speeds=(0.0, 10.0))


def test_corpus_counts_and_labels(synth_corpus):
    parsed = parse_trip_files(collect_inputs(synth_corpus), strict=False)
    assert len(parsed.trips) == 80
    with open(synth_corpus / "labels.csv", newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 30
    assert {r["label"] for r in rows} == set(ENCOUNTER_KINDS)
    keys = {t.key for t in parsed.trips}
    assert all(r["trip_a"] in keys and r["trip_b"] in keys for r in rows)


def test_corpus_trips_qualify(synth_corpus):
    parsed = parse_trip_files(collect_inputs(synth_corpus), strict=False)
    bounds = RegionBounds()
    assert all(region_filter(t, bounds) and continuity_check(t) for t in parsed.trips)


def test_corpus_byte_identical_for_same_seed(tmp_path):
    generate_corpus(tmp_path / "x", 3, seed=5)
    generate_corpus(tmp_path / "y", 3, seed=5)
    names = sorted(p.name for p in (tmp_path / "x").iterdir())
    assert names == sorted(p.name for p in (tmp_path / "y").iterdir())
    match, mismatch, errors = filecmp.cmpfiles(tmp_path / "x", tmp_path / "y", names, shallow=False)
    assert mismatch == [] and errors == []


def test_corpus_differs_across_seeds(tmp_path):
    generate_corpus(tmp_path / "x", 2, seed=5)
    generate_corpus(tmp_path / "y", 2, seed=6)
    assert (tmp_path / "x" / "pair_0000.csv").read_bytes() != (tmp_path / "y" / "pair_0000.csv").read_bytes()
