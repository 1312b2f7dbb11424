import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import naive_pairs
from v2v_encounters.errors import UnsortedInput
from v2v_encounters.geo import BBox
from v2v_encounters.matcher import (
    TripPairCandidate,
    TripSpan,
    brute_force_match,
    read_pairs_csv,
    sort_trips,
    sweep_match,
    write_pairs_csv,
)
from v2v_encounters.synthgen import concurrency_workload, random_population

BOX = BBox(42.28, 42.29, -83.75, -83.74)
FAR_BOX = BBox(43.28, 43.29, -83.75, -83.74)


def as_set(pairs):
    return {(p.trip_a, p.trip_b, p.overlap_start, p.overlap_end) for p in pairs}


def test_sort_trips_example():
    spans = [TripSpan("x", 5, 9, BOX), TripSpan("y", 3, 8, BOX), TripSpan("z", 3, 4, BOX)]
    assert [(s.start_time, s.end_time) for s in sort_trips(spans)] == [(3, 4), (3, 8), (5, 9)]


def test_sort_trips_idempotent_and_empty():
    spans = sort_trips(random_population(30, np.random.default_rng(0)))
    assert sort_trips(spans) == spans
    assert sort_trips([]) == []


def test_sort_trips_stable_for_ties():
    spans = [TripSpan("b", 1, 2, BOX), TripSpan("a", 1, 2, BOX)]
    assert [s.key for s in sort_trips(spans)] == ["b", "a"]


def test_disjoint_time_spans_no_candidates():
    pairs, stats = sweep_match([TripSpan("a", 0, 10, BOX), TripSpan("b", 11, 20, BOX)])
    assert pairs == [] and stats.comparisons == 0


def test_overlapping_pair_one_candidate():
    pairs, stats = sweep_match([TripSpan("b", 0, 10, BOX), TripSpan("a", 5, 20, BOX)])
    assert pairs == [TripPairCandidate("a", "b", 5, 10)]
    assert stats.pairs_out == 1 and stats.comparisons == 1


def test_spatially_disjoint_resident_is_not_evicted():
    # b fails the spatial test against a, but must still meet c later
    spans = [TripSpan("a", 0, 100, FAR_BOX), TripSpan("b", 0, 100, BOX), TripSpan("c", 50, 60, BOX)]
    pairs, _ = sweep_match(spans)
    assert as_set(pairs) == {("b", "c", 50, 60)}


def test_margin_bridges_small_gap():
    # boxes ~150 m apart in latitude: joined by 2 x 100 m margins, not by 2 x 50 m
    gap = 150 / 111_195.08
    a = TripSpan("a", 0, 10, BBox(42.0, 42.001, -83.0, -82.99))
    b = TripSpan("b", 0, 10, BBox(42.001 + gap, 42.002 + gap, -83.0, -82.99))
    assert len(sweep_match([a, b], margin=100.0)[0]) == 1
    assert len(sweep_match([a, b], margin=50.0)[0]) == 0


def test_unsorted_input_detected():
    with pytest.raises(UnsortedInput):
        sweep_match([TripSpan("a", 5, 10, BOX), TripSpan("b", 3, 10, BOX)])


def test_degenerate_inputs():
    assert sweep_match([])[0] == []
    assert sweep_match([TripSpan("a", 0, 1, BOX)])[0] == []
    assert brute_force_match([])[0] == []


def test_brute_force_complete_graph():
    spans = [TripSpan(k, 0, 10, BOX) for k in "abc"]
    pairs, stats = brute_force_match(spans)
    assert len(pairs) == 3 and stats.comparisons == 3


def test_brute_force_counts_all_pairs():
    spans = [TripSpan(f"t{i}", 10 * i, 10 * i + 5, BOX) for i in range(25)]
    pairs, stats = brute_force_match(spans)
    assert pairs == [] and stats.comparisons == 25 * 24 // 2


def test_candidate_canonical_order_enforced():
    with pytest.raises(ValueError):
        TripPairCandidate("b", "a", 0, 1)
    with pytest.raises(ValueError):
        TripPairCandidate("a", "a", 0, 1)


def test_fifty_random_trips_match_brute_force():
    spans = sort_trips(random_population(50, np.random.default_rng(42)))
    sweep, _ = sweep_match(spans)
    brute, _ = brute_force_match(spans)
    assert sweep == brute
    assert as_set(brute) == naive_pairs(spans)
    assert len(sweep) > 0


@given(
    n=st.integers(0, 60),
    horizon=st.integers(10, 5000),
    max_duration=st.integers(1, 3000),
    spread=st.floats(50, 5000),
    seed=st.integers(0, 2**32 - 1),
)
def test_sweep_equals_brute_force(n, horizon, max_duration, spread, seed):
    spans = sort_trips(random_population(n, np.random.default_rng(seed), horizon, max_duration, spread))
    sweep, sstats = sweep_match(spans)
    brute, bstats = brute_force_match(spans)
    assert sweep == brute
    assert as_set(sweep) == naive_pairs(spans)
    assert len(set(sweep)) == len(sweep)
    assert all(p.trip_a < p.trip_b for p in sweep)
    assert sstats.comparisons >= sstats.pairs_out
    assert sstats.comparisons <= bstats.comparisons


@given(n=st.integers(1, 400), c=st.integers(1, 12), seed=st.integers(0, 1000))
def test_comparisons_bounded_by_concurrency(n, c, seed):
    spans = sort_trips(concurrency_workload(n, c, seed))
    _, stats = sweep_match(spans)
    assert stats.peak_queue_len <= c
    assert stats.comparisons <= n * c


def test_pairs_csv_round_trip(tmp_path):
    spans = sort_trips(random_population(40, np.random.default_rng(3)))
    pairs, _ = sweep_match(spans)
    write_pairs_csv(pairs, tmp_path / "trip_pairs.csv")
    assert read_pairs_csv(tmp_path / "trip_pairs.csv") == pairs
    assert (tmp_path / "trip_pairs.csv").read_text().splitlines()[0] == "trip_a,trip_b,overlap_start_ds,overlap_end_ds"
