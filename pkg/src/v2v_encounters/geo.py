"""Spherical geodesy helpers and the GPS sample / trip containers.

Trips hold their samples column-wise in numpy arrays; ``Trip.samples`` gives a
row view as :class:`GpsSample` objects when one is needed.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from functools import cached_property
from typing import NamedTuple, Optional

import numpy as np

from .errors import DegenerateBearing, InsufficientSamples

EARTH_RADIUS_M = 6_371_008.8
METERS_PER_DEGREE = EARTH_RADIUS_M * math.pi / 180.0

TICK_S = 0.1  # native 10 Hz sampling step, in seconds
TICKS_PER_SECOND = 10

# Displacements below this are treated as standing still when deriving heading.
STATIONARY_EPS_M = 0.05


class BBox(NamedTuple):
    lat_min: float
    lat_max: float
    lon_min: float
    lon_max: float


@dataclass(frozen=True, slots=True)
class GpsSample:
    """One position fix. ``timestamp`` is in deciseconds since the Unix epoch."""

    timestamp: int
    latitude: float
    longitude: float
    speed: float = 0.0
    heading: float = 0.0

    def __post_init__(self):
        if not -90.0 <= self.latitude <= 90.0:
            raise ValueError(f"latitude out of range: {self.latitude}")
        if not -180.0 <= self.longitude <= 180.0:
            raise ValueError(f"longitude out of range: {self.longitude}")
        if self.speed < 0:
            raise ValueError(f"negative speed: {self.speed}")
        if not 0.0 <= self.heading < 360.0:
            raise ValueError(f"heading outside [0, 360): {self.heading}")


def _frozen_array(values, dtype) -> np.ndarray:
    arr = np.array(values, dtype=dtype)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Trip:
    """A single vehicle's time-ordered GPS samples.

    ``speed`` and ``heading`` may be ``None`` until :func:`derive_kinematics`
    fills them in. Raw trips straight out of the parser are not guaranteed to
    be continuous; :mod:`v2v_encounters.ingest` does the qualification.
    """

    device_id: str
    trip_id: str
    timestamps: np.ndarray
    lat: np.ndarray
    lon: np.ndarray
    speed: Optional[np.ndarray] = None
    heading: Optional[np.ndarray] = None

    def __post_init__(self):
        object.__setattr__(self, "timestamps", _frozen_array(self.timestamps, np.int64))
        object.__setattr__(self, "lat", _frozen_array(self.lat, np.float64))
        object.__setattr__(self, "lon", _frozen_array(self.lon, np.float64))
        n = len(self.timestamps)
        if len(self.lat) != n or len(self.lon) != n:
            raise ValueError("timestamp/latitude/longitude lengths differ")
        for name in ("speed", "heading"):
            col = getattr(self, name)
            if col is not None:
                col = _frozen_array(col, np.float64)
                if len(col) != n:
                    raise ValueError(f"{name} column length differs from timestamps")
                object.__setattr__(self, name, col)

    @property
    def key(self) -> str:
        """Trip identifier used for pairing and canonical ordering."""
        return f"{self.device_id}:{self.trip_id}"

    def __len__(self) -> int:
        return len(self.timestamps)

    @property
    def start_time(self) -> int:
        return int(self.timestamps[0])

    @property
    def end_time(self) -> int:
        return int(self.timestamps[-1])

    @cached_property
    def bbox(self) -> BBox:
        return BBox(
            float(self.lat.min()), float(self.lat.max()),
            float(self.lon.min()), float(self.lon.max()),
        )

    @cached_property
    def v_max(self) -> Optional[float]:
        if self.speed is None:
            return None
        return float(self.speed.max())

    @property
    def has_kinematics(self) -> bool:
        return self.speed is not None and self.heading is not None

    def index_of(self, t: int) -> int:
        """Sample index of tick ``t``; valid only for continuous trips."""
        return int(t - self.timestamps[0])

    @property
    def samples(self) -> list[GpsSample]:
        speed = self.speed if self.speed is not None else np.zeros(len(self))
        heading = self.heading if self.heading is not None else np.zeros(len(self))
        return [
            GpsSample(int(t), float(la), float(lo), float(s), float(h))
            for t, la, lo, s, h in zip(self.timestamps, self.lat, self.lon, speed, heading)
        ]


def haversine_distance(a: tuple[float, float], b: tuple[float, float]) -> float:
    """Great-circle distance in meters between two ``(lat, lon)`` points in degrees."""
    lat1, lon1 = map(math.radians, a)
    lat2, lon2 = map(math.radians, b)
    h = (
        math.sin((lat2 - lat1) / 2) ** 2
        + math.cos(lat1) * math.cos(lat2) * math.sin((lon2 - lon1) / 2) ** 2
    )
    return 2 * EARTH_RADIUS_M * math.asin(math.sqrt(min(1.0, h)))


def haversine_array(lat1, lon1, lat2, lon2) -> np.ndarray:
    """Vectorized :func:`haversine_distance` over arrays of degrees."""
    lat1 = np.radians(lat1)
    lat2 = np.radians(lat2)
    dlat = lat2 - lat1
    dlon = np.radians(np.asarray(lon2) - np.asarray(lon1))
    h = np.sin(dlat / 2) ** 2 + np.cos(lat1) * np.cos(lat2) * np.sin(dlon / 2) ** 2
    return 2 * EARTH_RADIUS_M * np.arcsin(np.sqrt(np.minimum(1.0, h)))


def _wrap_degrees(deg):
    deg = np.mod(deg, 360.0)
    # mod of a tiny negative value rounds up to exactly 360.0
    return np.where(deg >= 360.0, 0.0, deg)


def bearing_array(lat1, lon1, lat2, lon2) -> np.ndarray:
    lat1 = np.radians(lat1)
    lat2 = np.radians(lat2)
    dlon = np.radians(np.asarray(lon2) - np.asarray(lon1))
    x = np.sin(dlon) * np.cos(lat2)
    y = np.cos(lat1) * np.sin(lat2) - np.sin(lat1) * np.cos(lat2) * np.cos(dlon)
    return _wrap_degrees(np.degrees(np.arctan2(x, y)))


def initial_bearing(a: tuple[float, float], b: tuple[float, float]) -> float:
    """Initial great-circle bearing from ``a`` to ``b``, degrees clockwise from north.

    Raises:
        DegenerateBearing: if the two points coincide.
    """
    if a[0] == b[0] and a[1] == b[1]:
        raise DegenerateBearing(f"bearing undefined between coincident points {a}")
    return float(bearing_array(a[0], a[1], b[0], b[1]))


def derive_kinematics(trip: Trip, force: bool = False) -> Trip:
    """Fill in per-sample speed (m/s) and heading (degrees) from positions.

    Columns the trip already carries are kept verbatim unless ``force`` is set.
    Speed at sample i is the distance to sample i+1 over one tick; heading is
    the bearing to sample i+1, carried forward across stationary stretches
    (0 before the first movement). The last sample repeats its predecessor.
    """
    n = len(trip)
    if n < 2:
        raise InsufficientSamples(f"trip {trip.key} has {n} sample(s); need at least 2")
    need_speed = force or trip.speed is None
    need_heading = force or trip.heading is None
    if not (need_speed or need_heading):
        return trip

    lat, lon = trip.lat, trip.lon
    step = haversine_array(lat[:-1], lon[:-1], lat[1:], lon[1:])
    speed, heading = trip.speed, trip.heading
    if need_speed:
        seg_speed = step / TICK_S
        speed = np.append(seg_speed, seg_speed[-1])
    if need_heading:
        seg_bearing = bearing_array(lat[:-1], lon[:-1], lat[1:], lon[1:])
        moving = step >= STATIONARY_EPS_M
        last_valid = np.maximum.accumulate(np.where(moving, np.arange(n - 1), -1))
        seg_heading = np.where(last_valid >= 0, seg_bearing[np.maximum(last_valid, 0)], 0.0)
        heading = np.append(seg_heading, seg_heading[-1])
    return dataclasses.replace(trip, speed=speed, heading=heading)


def offset_to_latlon(lat0: float, lon0: float, east_m, north_m):
    """Local flat-earth offsets (meters) around an anchor back to degrees."""
    lat = lat0 + np.asarray(north_m) / METERS_PER_DEGREE
    lon = lon0 + np.asarray(east_m) / (METERS_PER_DEGREE * math.cos(math.radians(lat0)))
    return lat, lon
