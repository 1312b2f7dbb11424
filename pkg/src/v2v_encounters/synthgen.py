"""Labeled synthetic trip pairs for desk-scale ground truth.

Each scenario is built in a local east/north frame around an anchor with
straight, constant-speed paths, then converted to lat/lon. Headings are
written from the geometry (as logging devices report them); speeds are
derived from the noisy positions so they bound the observed motion.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Optional, Union

import numpy as np

from .geo import TICKS_PER_SECOND, BBox, Trip, derive_kinematics, haversine_distance, offset_to_latlon
from .ingest import RegionBounds, write_trips_csv
from .matcher import TripSpan

KINDS = ("car_following", "intersection", "by_passing", "non_encounter")
ENCOUNTER_KINDS = KINDS[:3]

# 2014-01-01T00:00:00Z in deciseconds
BASE_TIME_DS = 13_885_344_000


@dataclass(frozen=True)
class ScenarioSpec:
    kind: str
    duration: float = 60.0  # seconds of the shared core window
    speeds: tuple[float, float] = (15.0, 15.0)
    # meters: follower gap (car_following), crossing miss distance (intersection),
    # lateral offset (by_passing) or closest approach (non_encounter)
    lateral_offset: float = 5.0
    noise_sigma: float = 1.0
    anchor: tuple[float, float] = (42.28, -83.74)
    seed: int = 0
    heading: float = 0.0  # heading of vehicle a, degrees
    start_time: int = BASE_TIME_DS
    lead_in: tuple[float, float] = (0.0, 0.0)  # extra seconds before the core window, per vehicle
    lead_out: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown scenario kind {self.kind!r}")
        if self.duration < 10:
            raise ValueError("duration must be at least 10 s")
        if min(self.speeds) < 0 or self.noise_sigma < 0:
            raise ValueError("speeds and noise_sigma must be non-negative")
        if self.kind == "non_encounter" and min(self.speeds) <= 0:
            raise ValueError("non_encounter needs both vehicles moving")


def crossing_lag(separation: float, speeds: tuple[float, float]) -> float:
    """Seconds between two perpendicular crossings that keep the vehicles ``separation`` apart."""
    va, vb = speeds
    return separation * math.hypot(va, vb) / (va * vb)


def _unit(heading_deg: float) -> np.ndarray:
    rad = math.radians(heading_deg)
    return np.array([math.sin(rad), math.cos(rad)])  # (east, north)


def _vehicle_track(spec: ScenarioSpec, which: int):
    """East/north positions (m), timestamps and heading for one vehicle.

    Time zero is the centre of the core window; paths cross, meet or trail
    relative to that instant.
    """
    v = spec.speeds[which]
    half = spec.duration / 2.0
    t0 = -half - spec.lead_in[which]
    t1 = half + spec.lead_out[which]
    n0 = int(round(t0 * TICKS_PER_SECOND))
    n1 = int(round(t1 * TICKS_PER_SECOND))
    t = np.arange(n0, n1 + 1) / TICKS_PER_SECOND
    ua = _unit(spec.heading)
    ua_perp = _unit(spec.heading + 90.0)
    kind = spec.kind
    if kind == "non_encounter":
        # perpendicular paths through one crossing point, passed lag/2 before
        # and after t=0 respectively, so they never come close
        lag = crossing_lag(spec.lateral_offset, spec.speeds)
        if which == 0:
            heading, u, base = spec.heading, ua, v * lag / 2 * ua
        else:
            heading, u, base = spec.heading + 90.0, ua_perp, -v * lag / 2 * ua_perp
    elif which == 0:
        heading, u, base = spec.heading, ua, np.zeros(2)
    elif kind == "car_following":
        # follower on the same line, lateral_offset meters behind
        heading, u, base = spec.heading, ua, -spec.lateral_offset * ua
    elif kind == "intersection":
        # perpendicular; at t=0 b sits lateral_offset meters from the crossing point
        heading, u, base = spec.heading + 90.0, ua_perp, spec.lateral_offset * ua
    else:
        heading, u, base = spec.heading + 180.0, -ua, spec.lateral_offset * ua_perp
    pos = base[None, :] + v * t[:, None] * u[None, :]
    ticks = spec.start_time + (np.arange(n0, n1 + 1) - n0)
    return pos, ticks, heading % 360.0, n0


def generate_pair(spec: ScenarioSpec, ids: tuple[str, str] = ("veh_a", "veh_b")) -> tuple[Trip, Trip, str]:
    """Two 10 Hz trips realizing ``spec``; deterministic for a given seed."""
    rng = np.random.default_rng(spec.seed)
    trips = []
    tracks = [_vehicle_track(spec, w) for w in (0, 1)]
    first = min(tr[3] for tr in tracks)
    for which, (pos, ticks, heading, n0) in enumerate(tracks):
        ticks = ticks + (n0 - first)
        if spec.noise_sigma > 0:
            pos = pos + rng.normal(0.0, spec.noise_sigma, size=pos.shape)
        lat, lon = offset_to_latlon(spec.anchor[0], spec.anchor[1], pos[:, 0], pos[:, 1])
        trip = Trip(ids[which], "1", ticks, lat, lon, heading=np.full(len(ticks), heading))
        trips.append(derive_kinematics(trip))
    return trips[0], trips[1], spec.kind


def random_spec(kind: str, rng: np.random.Generator, noise_sigma: float = 1.0, **overrides) -> ScenarioSpec:
    """Draw a scenario of ``kind`` with randomized speeds, offsets and timing."""
    if kind == "car_following":
        v = rng.uniform(10.0, 20.0)
        speeds = (v, v)
        duration = rng.uniform(40.0, 70.0)
        offset = rng.uniform(20.0, 50.0)
    elif kind == "intersection":
        speeds = tuple(rng.uniform(8.0, 16.0, size=2))
        duration = rng.uniform(30.0, 50.0)
        offset = rng.uniform(0.0, 10.0)
    elif kind == "by_passing":
        speeds = tuple(rng.uniform(8.0, 16.0, size=2))
        duration = rng.uniform(30.0, 50.0)
        offset = rng.uniform(3.0, 7.0)
    else:
        speeds = tuple(rng.uniform(8.0, 20.0, size=2))
        offset = rng.uniform(1200.0, 2000.0)
        duration = crossing_lag(offset, speeds) + rng.uniform(10.0, 30.0)
    spec = ScenarioSpec(
        kind=kind,
        duration=float(round(duration, 1)),
        speeds=(float(speeds[0]), float(speeds[1])),
        lateral_offset=float(offset),
        noise_sigma=noise_sigma,
        heading=float(rng.uniform(0.0, 360.0)),
        seed=int(rng.integers(2**31)),
        lead_in=tuple(float(x) for x in np.round(rng.uniform(0.0, 3.0, size=2), 1)),
        lead_out=tuple(float(x) for x in np.round(rng.uniform(0.0, 3.0, size=2), 1)),
    )
    return replace(spec, **overrides) if overrides else spec


def _pick_anchor(rng, bounds: RegionBounds, taken: list, min_sep_m: float, edge_m: float = 5000.0):
    dlat = edge_m / 111_000.0
    dlon = edge_m / (111_000.0 * math.cos(math.radians(bounds.lat_max)))
    for _ in range(10_000):
        anchor = (
            float(rng.uniform(bounds.lat_min + dlat, bounds.lat_max - dlat)),
            float(rng.uniform(bounds.lon_min + dlon, bounds.lon_max - dlon)),
        )
        if all(haversine_distance(anchor, other) >= min_sep_m for other in taken):
            return anchor
    raise RuntimeError("could not place a well-separated anchor")


def generate_corpus(
    out_dir: Union[str, Path],
    n_per_kind: int,
    seed: int,
    noise_sigma: float = 1.0,
    bounds: Optional[RegionBounds] = None,
    slot_ds: int = 300,
) -> dict:
    """Write ``n_per_kind`` pairs of each scenario kind as ingest-format CSVs.

    One CSV per pair (``pair_NNNN.csv``) plus ``labels.csv`` listing the
    encounter pairs (``trip_a,trip_b,label``; non-encounter pairs are not
    listed). Pairs start ``slot_ds`` apart so consecutive pairs overlap in
    time; anchors are kept at least 5 km apart so pairs never interact.

    Returns a summary dict with trip and pair counts.
    """
    if n_per_kind < 1:
        raise ValueError("n_per_kind must be >= 1")
    bounds = bounds or RegionBounds()
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)

    kinds = [k for k in KINDS for _ in range(n_per_kind)]
    order = rng.permutation(len(kinds))
    anchors: list = []
    labels = []
    for slot, idx in enumerate(order):
        kind = kinds[idx]
        anchor = _pick_anchor(rng, bounds, anchors, 5000.0)
        anchors.append(anchor)
        spec = random_spec(
            kind, rng, noise_sigma=noise_sigma,
            anchor=anchor, start_time=BASE_TIME_DS + slot * slot_ds,
        )
        ids = (f"veh{2 * slot:04d}", f"veh{2 * slot + 1:04d}")
        a, b, label = generate_pair(spec, ids)
        write_trips_csv([a, b], out_dir / f"pair_{slot:04d}.csv")
        if kind in ENCOUNTER_KINDS:
            ka, kb = sorted((a.key, b.key))
            labels.append((ka, kb, label))

    with open(out_dir / "labels.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["trip_a", "trip_b", "label"])
        w.writerows(sorted(labels))
    return {"trips": 2 * len(kinds), "pairs": len(kinds), "encounter_pairs": len(labels)}


def concurrency_workload(
    n: int,
    concurrency: int,
    seed: int = 0,
    duration_range: tuple[int, int] = (50, 600),
    gap_range: tuple[int, int] = (1, 100),
    spread_m: float = 2000.0,
) -> list[TripSpan]:
    """Trip spans whose temporal concurrency never exceeds ``concurrency``.

    Trips are laid out in ``concurrency`` lanes; trips within a lane never
    overlap, so at most one per lane is alive at any tick.
    """
    rng = np.random.default_rng(seed)
    lane_clock = rng.integers(0, duration_range[1], size=concurrency).astype(np.int64)
    spans = []
    for i in range(n):
        lane = i % concurrency
        start = int(lane_clock[lane])
        end = start + int(rng.integers(duration_range[0], duration_range[1] + 1))
        lane_clock[lane] = end + int(rng.integers(gap_range[0], gap_range[1] + 1))
        spans.append(TripSpan(f"t{i:06d}", start, end, _random_box(rng, spread_m)))
    return spans


def random_population(
    n: int, rng: np.random.Generator, horizon: int = 10_000, max_duration: int = 2_000, spread_m: float = 3000.0
) -> list[TripSpan]:
    """Uniformly scattered trip spans; density is governed by horizon/max_duration."""
    spans = []
    for i in range(n):
        start = int(rng.integers(0, horizon))
        end = start + int(rng.integers(1, max_duration + 1))
        spans.append(TripSpan(f"t{i:04d}", start, end, _random_box(rng, spread_m)))
    return spans


def _random_box(rng: np.random.Generator, spread_m: float, lat0: float = 42.28, lon0: float = -83.74) -> BBox:
    center = rng.uniform(-spread_m, spread_m, size=2)
    half = rng.uniform(10.0, spread_m / 4, size=2)
    lat_lo, lon_lo = offset_to_latlon(lat0, lon0, center[0] - half[0], center[1] - half[1])
    lat_hi, lon_hi = offset_to_latlon(lat0, lon0, center[0] + half[0], center[1] + half[1])
    return BBox(float(lat_lo), float(lat_hi), float(lon_lo), float(lon_hi))
