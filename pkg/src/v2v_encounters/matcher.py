"""Temporal-spatial matching of trips into candidate pairs.

:func:`sweep_match` is the queue sweep over start-sorted trips; it keeps only
trips still alive at the incoming trip's start time, so with bounded temporal
concurrency the number of pair tests grows linearly in the trip count.
:func:`brute_force_match` tests every pair and serves as the oracle.

Both accept any objects exposing ``key``, ``start_time``, ``end_time`` and
``bbox`` (e.g. :class:`~v2v_encounters.geo.Trip` or :class:`TripSpan`).
"""

from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Iterable, NamedTuple, Sequence, Union

import numpy as np

from .errors import UnsortedInput
from .geo import METERS_PER_DEGREE, BBox

DEFAULT_MARGIN_M = 100.0


class TripSpan(NamedTuple):
    """Just the parts of a trip the matcher needs."""

    key: str
    start_time: int
    end_time: int
    bbox: BBox


@dataclass(frozen=True, order=True)
class TripPairCandidate:
    trip_a: str
    trip_b: str
    overlap_start: int
    overlap_end: int

    def __post_init__(self):
        if self.trip_a >= self.trip_b:
            raise ValueError(f"pair not in canonical order: {self.trip_a!r}, {self.trip_b!r}")
        if self.overlap_start > self.overlap_end:
            raise ValueError("empty overlap window")


@dataclass
class MatchStats:
    trips_in: int = 0
    pairs_out: int = 0
    comparisons: int = 0
    peak_queue_len: int = 0

    def to_dict(self) -> dict:
        return asdict(self)


def expanded_bbox(box: BBox, margin: float) -> BBox:
    """Grow a lat/lon box by ``margin`` meters, converted at the box's mean latitude."""
    dlat = margin / METERS_PER_DEGREE
    mean_lat = 0.5 * (box.lat_min + box.lat_max)
    coslat = max(math.cos(math.radians(mean_lat)), 1e-12)
    dlon = margin / (METERS_PER_DEGREE * coslat)
    return BBox(box.lat_min - dlat, box.lat_max + dlat, box.lon_min - dlon, box.lon_max + dlon)


def boxes_intersect(a: BBox, b: BBox) -> bool:
    return (
        a.lat_min <= b.lat_max and b.lat_min <= a.lat_max
        and a.lon_min <= b.lon_max and b.lon_min <= a.lon_max
    )


def _candidate(a, b, box_a: BBox, box_b: BBox):
    start = max(a.start_time, b.start_time)
    end = min(a.end_time, b.end_time)
    if start > end or not boxes_intersect(box_a, box_b):
        return None
    ka, kb = (a.key, b.key) if a.key < b.key else (b.key, a.key)
    return TripPairCandidate(ka, kb, start, end)


def sort_trips(trips: Iterable) -> list:
    """Order by (start_time, end_time); ties keep input order."""
    return sorted(trips, key=lambda t: (t.start_time, t.end_time))


def sweep_match(
    trips: Sequence, margin: float = DEFAULT_MARGIN_M
) -> tuple[list[TripPairCandidate], MatchStats]:
    """Queue-sweep pair matching over trips sorted by :func:`sort_trips`.

    For each incoming trip, queue residents that ended before it starts are
    evicted (no later trip can overlap them either). Every remaining resident
    is tested for a shared time window and intersecting margin-expanded boxes.
    A resident that fails only the spatial test stays queued.

    Raises:
        UnsortedInput: if start times decrease along ``trips``.
    """
    stats = MatchStats(trips_in=len(trips))
    queue: list[tuple[object, BBox]] = []
    out: list[TripPairCandidate] = []
    prev_start = None
    for trip in trips:
        start = trip.start_time
        if prev_start is not None and start < prev_start:
            raise UnsortedInput(f"trip {trip.key} starts at {start}, before {prev_start}")
        prev_start = start
        queue = [entry for entry in queue if entry[0].end_time >= start]
        box = expanded_bbox(trip.bbox, margin)
        for resident, rbox in queue:
            stats.comparisons += 1
            cand = _candidate(resident, trip, rbox, box)
            if cand is not None:
                out.append(cand)
        queue.append((trip, box))
        stats.peak_queue_len = max(stats.peak_queue_len, len(queue))
    out.sort()
    stats.pairs_out = len(out)
    return out, stats


def brute_force_match(
    trips: Sequence, margin: float = DEFAULT_MARGIN_M
) -> tuple[list[TripPairCandidate], MatchStats]:
    """Test all n(n-1)/2 pairs with the same predicate as :func:`sweep_match`.

    The pair tests are vectorized one row at a time, so this stays usable as
    an oracle up to several thousand trips.
    """
    n = len(trips)
    stats = MatchStats(trips_in=n, comparisons=n * (n - 1) // 2)
    if n < 2:
        return [], stats
    boxes = np.array([expanded_bbox(t.bbox, margin) for t in trips], dtype=np.float64)
    starts = np.array([t.start_time for t in trips], dtype=np.int64)
    ends = np.array([t.end_time for t in trips], dtype=np.int64)
    out = []
    for i in range(n - 1):
        j = np.arange(i + 1, n)
        lo = np.maximum(starts[i], starts[j])
        hi = np.minimum(ends[i], ends[j])
        hit = (
            (lo <= hi)
            & (boxes[i, 0] <= boxes[j, 1]) & (boxes[j, 0] <= boxes[i, 1])
            & (boxes[i, 2] <= boxes[j, 3]) & (boxes[j, 2] <= boxes[i, 3])
        )
        for jj, s, e in zip(j[hit], lo[hit], hi[hit]):
            ka, kb = trips[i].key, trips[int(jj)].key
            if kb < ka:
                ka, kb = kb, ka
            out.append(TripPairCandidate(ka, kb, int(s), int(e)))
    out.sort()
    stats.pairs_out = len(out)
    return out, stats


def write_pairs_csv(pairs: Iterable[TripPairCandidate], path: Union[str, Path]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["trip_a", "trip_b", "overlap_start_ds", "overlap_end_ds"])
        for p in pairs:
            w.writerow([p.trip_a, p.trip_b, p.overlap_start, p.overlap_end])


def read_pairs_csv(path: Union[str, Path]) -> list[TripPairCandidate]:
    with open(path, newline="", encoding="utf-8") as fh:
        return [
            TripPairCandidate(r["trip_a"], r["trip_b"], int(r["overlap_start_ds"]), int(r["overlap_end_ds"]))
            for r in csv.DictReader(fh)
        ]
