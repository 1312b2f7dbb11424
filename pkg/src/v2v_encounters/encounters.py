"""Coarse and fine filtering of candidate trip pairs into vehicle encounters."""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from .geo import TICKS_PER_SECOND, GpsSample, Trip, haversine_array
from .matcher import TripPairCandidate

log = logging.getLogger(__name__)

# Combined speeds below this make the pair effectively stationary.
MIN_SPEED_SUM = 0.01


@dataclass(frozen=True)
class FilterParams:
    """Radii in meters, durations in deciseconds."""

    coarse_radius: float = 1000.0
    encounter_radius: float = 100.0
    min_duration: int = 50
    merge_gap: int = 20

    def __post_init__(self):
        if not self.coarse_radius > self.encounter_radius > 0:
            raise ValueError("need coarse_radius > encounter_radius > 0")
        if self.min_duration < 1 or self.merge_gap < 0:
            raise ValueError("need min_duration >= 1 and merge_gap >= 0")


@dataclass(frozen=True, eq=False)
class VehicleEncounter:
    """Aligned samples of two trips over a window where they stay close.

    Arrays are indexed by tick within ``[t_start, t_end]``.
    """

    trip_a: str
    trip_b: str
    t_start: int
    t_end: int
    lat_a: np.ndarray
    lon_a: np.ndarray
    lat_b: np.ndarray
    lon_b: np.ndarray
    distance: np.ndarray
    heading_a: np.ndarray
    heading_b: np.ndarray
    speed_a: Optional[np.ndarray] = None
    speed_b: Optional[np.ndarray] = None

    @property
    def id(self) -> str:
        return f"{self.trip_a}~{self.trip_b}@{self.t_start}"

    @property
    def n_samples(self) -> int:
        return self.t_end - self.t_start + 1

    @property
    def timestamps(self) -> np.ndarray:
        return np.arange(self.t_start, self.t_end + 1, dtype=np.int64)

    @property
    def min_distance(self) -> float:
        return float(self.distance.min())

    @property
    def samples(self) -> list[tuple[GpsSample, GpsSample, float]]:
        sa = self.speed_a if self.speed_a is not None else np.zeros(self.n_samples)
        sb = self.speed_b if self.speed_b is not None else np.zeros(self.n_samples)
        return [
            (
                GpsSample(int(t), float(self.lat_a[i]), float(self.lon_a[i]), float(sa[i]), float(self.heading_a[i])),
                GpsSample(int(t), float(self.lat_b[i]), float(self.lon_b[i]), float(sb[i]), float(self.heading_b[i])),
                float(self.distance[i]),
            )
            for i, t in enumerate(self.timestamps)
        ]

    def summary(self) -> dict:
        return {
            "id": self.id,
            "trip_a": self.trip_a,
            "trip_b": self.trip_b,
            "t_start_ds": self.t_start,
            "t_end_ds": self.t_end,
            "n_samples": self.n_samples,
            "min_distance_m": self.min_distance,
        }


@dataclass
class FilterStats:
    pairs_in: int = 0
    coarse_eliminated: int = 0
    pairs_with_encounters: int = 0
    encounters: int = 0

    @property
    def elimination_rate(self) -> float:
        return self.coarse_eliminated / self.pairs_in if self.pairs_in else 0.0

    def to_dict(self) -> dict:
        d = asdict(self)
        d["elimination_rate"] = self.elimination_rate
        return d


def coarse_interval(v_max_a: float, v_max_b: float, params: FilterParams = FilterParams()) -> Optional[int]:
    """Coarse resampling step in deciseconds: 2(D - d) / (v_a + v_b), floored.

    Between samples this far apart the pair distance cannot move by more than
    D - d from the nearest sample. Returns ``None`` when the pair is
    effectively stationary, in which case a single mid-window sample is enough.
    """
    total = v_max_a + v_max_b
    if total < MIN_SPEED_SUM:
        return None
    seconds = 2.0 * (params.coarse_radius - params.encounter_radius) / total
    return max(1, math.floor(TICKS_PER_SECOND * seconds))


def _window(trip: Trip, t0: int, t1: int) -> slice:
    return slice(trip.index_of(t0), trip.index_of(t1) + 1)


def _distances_at(a: Trip, b: Trip, ticks: np.ndarray) -> np.ndarray:
    ia = ticks - a.start_time
    ib = ticks - b.start_time
    return haversine_array(a.lat[ia], a.lon[ia], b.lat[ib], b.lon[ib])


def coarse_sample_ticks(pair: TripPairCandidate, step: Optional[int]) -> np.ndarray:
    s, e = pair.overlap_start, pair.overlap_end
    if step is None:
        return np.unique(np.array([s, (s + e) // 2, e], dtype=np.int64))
    ticks = np.arange(s, e + 1, step, dtype=np.int64)
    if ticks[-1] != e:
        ticks = np.append(ticks, e)
    return ticks


def coarse_filter(pair: TripPairCandidate, trips: Mapping[str, Trip], params: FilterParams = FilterParams()) -> bool:
    """True to keep the pair, False to eliminate it.

    The shared window is sampled every :func:`coarse_interval` ticks, plus
    both endpoints; the pair is eliminated iff every sampled distance is at
    least the coarse radius.
    """
    a, b = trips[pair.trip_a], trips[pair.trip_b]
    step = coarse_interval(a.v_max, b.v_max, params)
    dist = _distances_at(a, b, coarse_sample_ticks(pair, step))
    return bool(dist.min() < params.coarse_radius)


def close_runs(mask: np.ndarray, merge_gap: int) -> list[tuple[int, int]]:
    """Inclusive index runs where ``mask`` holds, merging runs split by short gaps."""
    if not mask.any():
        return []
    padded = np.concatenate(([False], mask, [False]))
    edges = np.flatnonzero(np.diff(padded.astype(np.int8)))
    starts, ends = edges[0::2], edges[1::2] - 1
    runs = [(int(starts[0]), int(ends[0]))]
    for s, e in zip(starts[1:], ends[1:]):
        if s - runs[-1][1] - 1 <= merge_gap:
            runs[-1] = (runs[-1][0], int(e))
        else:
            runs.append((int(s), int(e)))
    return runs


def fine_filter(pair: TripPairCandidate, trips: Mapping[str, Trip], params: FilterParams = FilterParams()) -> list[VehicleEncounter]:
    """Per-tick distances over the shared window, cut into encounter runs."""
    a, b = trips[pair.trip_a], trips[pair.trip_b]
    sa = _window(a, pair.overlap_start, pair.overlap_end)
    sb = _window(b, pair.overlap_start, pair.overlap_end)
    dist = haversine_array(a.lat[sa], a.lon[sa], b.lat[sb], b.lon[sb])
    out = []
    for i0, i1 in close_runs(dist <= params.encounter_radius, params.merge_gap):
        if i1 - i0 + 1 < params.min_duration:
            continue
        ia = slice(sa.start + i0, sa.start + i1 + 1)
        ib = slice(sb.start + i0, sb.start + i1 + 1)
        out.append(VehicleEncounter(
            pair.trip_a, pair.trip_b,
            pair.overlap_start + i0, pair.overlap_start + i1,
            a.lat[ia], a.lon[ia], b.lat[ib], b.lon[ib],
            dist[i0:i1 + 1],
            a.heading[ia], b.heading[ib],
            a.speed[ia], b.speed[ib],
        ))
    return out


def filter_pair(pair, trips, params=FilterParams(), skip_coarse=False):
    """Coarse then fine filter one pair; ``None`` means coarse elimination."""
    if not skip_coarse and not coarse_filter(pair, trips, params):
        return None
    return fine_filter(pair, trips, params)


def find_encounters(
    pairs: Sequence[TripPairCandidate],
    trips: Iterable[Trip] | Mapping[str, Trip],
    params: FilterParams = FilterParams(),
    skip_coarse: bool = False,
    threads: int = 1,
) -> tuple[list[VehicleEncounter], FilterStats]:
    """Run both filter stages over a batch of pairs.

    Output order is canonical (by pair, then start tick) regardless of
    ``threads``.
    """
    if not isinstance(trips, Mapping):
        trips = {t.key: t for t in trips}
    pairs = sorted(pairs)

    def work(pair):
        return filter_pair(pair, trips, params, skip_coarse)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(work, pairs))
    else:
        results = [work(p) for p in pairs]

    stats = FilterStats(pairs_in=len(pairs))
    encounters: list[VehicleEncounter] = []
    for res in results:
        if res is None:
            stats.coarse_eliminated += 1
            continue
        if res:
            stats.pairs_with_encounters += 1
        encounters.extend(res)
    stats.encounters = len(encounters)
    log.info("coarse filter eliminated %d of %d pairs", stats.coarse_eliminated, stats.pairs_in)
    return encounters, stats
