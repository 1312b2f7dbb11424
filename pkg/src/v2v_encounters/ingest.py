"""Trip log parsing and preprocessing (region filter, continuity qualification)."""

from __future__ import annotations

import csv
import logging
import math
import re
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, NamedTuple, Optional, Union

import numpy as np

from .errors import MalformedInput
from .geo import Trip, derive_kinematics

log = logging.getLogger(__name__)

REQUIRED_COLUMNS = ("device_id", "trip_id", "timestamp_ds", "latitude", "longitude")
OPTIONAL_COLUMNS = ("speed_mps", "heading_deg")
TRIP_COLUMNS = REQUIRED_COLUMNS + OPTIONAL_COLUMNS

# Shorter trips cannot host a minimum-duration encounter.
MIN_TRIP_SAMPLES = 50


@dataclass(frozen=True)
class RegionBounds:
    """Closed lat/lon box. Defaults cover the Ann Arbor deployment area."""

    lat_min: float = 41.65
    lat_max: float = 44.5
    lon_min: float = -86.0
    lon_max: float = -82.37

    def __post_init__(self):
        if not (self.lat_min < self.lat_max and self.lon_min < self.lon_max):
            raise ValueError(f"empty region bounds: {self}")

    def contains(self, lat, lon) -> np.ndarray:
        lat = np.asarray(lat)
        lon = np.asarray(lon)
        return (
            (lat >= self.lat_min) & (lat <= self.lat_max)
            & (lon >= self.lon_min) & (lon <= self.lon_max)
        )


@dataclass
class QualificationReport:
    trips_read: int = 0
    trips_qualified: int = 0
    rejected_out_of_region: int = 0
    rejected_discontinuous: int = 0
    rejected_malformed: int = 0
    rejected_too_short: int = 0
    malformed_rows: int = 0

    @property
    def rejected_total(self) -> int:
        return (
            self.rejected_out_of_region + self.rejected_discontinuous
            + self.rejected_malformed + self.rejected_too_short
        )

    def reconciles(self) -> bool:
        return self.trips_read == self.trips_qualified + self.rejected_total

    def to_dict(self) -> dict:
        return asdict(self)


class ParseResult(NamedTuple):
    trips: list[Trip]
    malformed: set[str]  # keys of trips that had a bad row or a repeated timestamp
    malformed_rows: int
    skipped_files: tuple = ()


@dataclass
class _TripRows:
    timestamps: list = field(default_factory=list)
    lat: list = field(default_factory=list)
    lon: list = field(default_factory=list)
    speed: list = field(default_factory=list)
    heading: list = field(default_factory=list)
    bad: bool = False


def _parse_float(text: str) -> float:
    value = float(text)
    if not math.isfinite(value):
        raise ValueError(f"non-finite value {text!r}")
    return value


def parse_trip_files(paths: Iterable[Union[str, Path]], strict: bool = True) -> ParseResult:
    """Parse one or more ingest-format CSV files into raw trips.

    Rows for the same ``device_id:trip_id`` are merged across files and sorted
    by timestamp. A row that cannot be parsed is skipped and its trip is marked
    malformed; so is any trip containing a repeated timestamp. Optional speed
    and heading columns are kept only when every row of the trip supplies them.
    With ``strict=False`` files lacking the trip columns are skipped (and
    listed in ``skipped_files``) instead of raising.

    Raises:
        OSError: if a file cannot be read.
        MalformedInput: if a non-empty file lacks a required column.
    """
    rows: dict[tuple[str, str], _TripRows] = {}
    malformed_rows = 0
    skipped = []
    for path in paths:
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None:
                continue
            missing = [c for c in REQUIRED_COLUMNS if c not in reader.fieldnames]
            if missing and not strict:
                log.warning("%s: not a trip log (missing %s), skipped", path, ", ".join(missing))
                skipped.append(str(path))
                continue
            if missing:
                raise MalformedInput(f"{path}: missing column(s) {', '.join(missing)}")
            has_speed = "speed_mps" in reader.fieldnames
            has_heading = "heading_deg" in reader.fieldnames
            for rec in reader:
                dev, tid = rec.get("device_id"), rec.get("trip_id")
                if not dev or not tid:
                    malformed_rows += 1
                    continue
                acc = rows.setdefault((dev, tid), _TripRows())
                try:
                    ts = int(rec["timestamp_ds"])
                    lat = _parse_float(rec["latitude"])
                    lon = _parse_float(rec["longitude"])
                    if not (-90 <= lat <= 90 and -180 <= lon <= 180):
                        raise ValueError("coordinate out of range")
                    speed = heading = None
                    if has_speed and rec["speed_mps"] not in (None, ""):
                        speed = _parse_float(rec["speed_mps"])
                        if speed < 0:
                            raise ValueError("negative speed")
                    if has_heading and rec["heading_deg"] not in (None, ""):
                        heading = _parse_float(rec["heading_deg"]) % 360.0
                except (TypeError, ValueError) as exc:
                    log.debug("%s: skipping malformed row for %s:%s (%s)", path, dev, tid, exc)
                    malformed_rows += 1
                    acc.bad = True
                    continue
                acc.timestamps.append(ts)
                acc.lat.append(lat)
                acc.lon.append(lon)
                acc.speed.append(speed)
                acc.heading.append(heading)

    trips: list[Trip] = []
    malformed: set[str] = set()
    for (dev, tid), acc in sorted(rows.items()):
        if not acc.timestamps:
            malformed.add(f"{dev}:{tid}")
            continue
        order = np.argsort(np.asarray(acc.timestamps, dtype=np.int64), kind="stable")
        ts = np.asarray(acc.timestamps, dtype=np.int64)[order]

        def column(values):
            if any(v is None for v in values):
                return None
            return np.asarray(values, dtype=np.float64)[order]

        trip = Trip(
            dev, tid, ts,
            np.asarray(acc.lat)[order], np.asarray(acc.lon)[order],
            speed=column(acc.speed), heading=column(acc.heading),
        )
        if acc.bad or (len(ts) > 1 and np.any(np.diff(ts) == 0)):
            malformed.add(trip.key)
        trips.append(trip)
    return ParseResult(trips, malformed, malformed_rows, tuple(skipped))


def parse_trip_file(path: Union[str, Path]) -> ParseResult:
    return parse_trip_files([path])


def region_filter(trip: Trip, bounds: RegionBounds) -> bool:
    """True (retain) iff every sample lies inside ``bounds``, edges included."""
    return bool(np.all(bounds.contains(trip.lat, trip.lon)))


def continuity_check(trip: Trip) -> bool:
    """True (qualified) iff samples advance by exactly one tick throughout."""
    return bool(np.all(np.diff(trip.timestamps) == 1))


def qualify_trips(
    parsed: ParseResult,
    bounds: Optional[RegionBounds] = None,
    min_samples: int = MIN_TRIP_SAMPLES,
) -> tuple[list[Trip], QualificationReport]:
    """Apply the preprocessing rules and derive kinematics for survivors.

    Rejection reasons are attributed in a fixed order: malformed, out of
    region, discontinuous, too short. Rejection is always whole-trip.
    """
    bounds = bounds or RegionBounds()
    report = QualificationReport(malformed_rows=parsed.malformed_rows)
    parsed_keys = {t.key for t in parsed.trips}
    report.trips_read = len(parsed.trips) + len(parsed.malformed - parsed_keys)
    report.rejected_malformed = len(parsed.malformed)
    qualified = []
    for trip in parsed.trips:
        if trip.key in parsed.malformed:
            continue
        if not region_filter(trip, bounds):
            report.rejected_out_of_region += 1
        elif not continuity_check(trip):
            report.rejected_discontinuous += 1
        elif len(trip) < max(2, min_samples):
            report.rejected_too_short += 1
        else:
            qualified.append(derive_kinematics(trip))
    report.trips_qualified = len(qualified)
    return qualified, report


def collect_inputs(path: Union[str, Path]) -> list[Path]:
    """A CSV file, or every ``*.csv`` directly inside a directory, sorted."""
    path = Path(path)
    if path.is_dir():
        return sorted(path.glob("*.csv"))
    if not path.exists():
        raise FileNotFoundError(f"no such file or directory: {path}")
    return [path]


def _safe(name: str) -> str:
    return re.sub(r"[^A-Za-z0-9._-]", "_", name)


def trip_filename(trip: Trip) -> str:
    return f"{_safe(trip.device_id)}__{_safe(trip.trip_id)}.csv"


def write_trips_csv(trips: Iterable[Trip], path: Union[str, Path]) -> None:
    """Write trips in the ingest schema. Floats use ``repr`` so they round-trip exactly."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRIP_COLUMNS)
        for trip in trips:
            speed = trip.speed if trip.speed is not None else [None] * len(trip)
            heading = trip.heading if trip.heading is not None else [None] * len(trip)
            for t, la, lo, s, h in zip(trip.timestamps, trip.lat, trip.lon, speed, heading):
                w.writerow([
                    trip.device_id, trip.trip_id, int(t), repr(float(la)), repr(float(lo)),
                    "" if s is None else repr(float(s)), "" if h is None else repr(float(h)),
                ])


def write_trip_csv(trip: Trip, path: Union[str, Path]) -> None:
    write_trips_csv([trip], path)


def write_trip_store(trips: Iterable[Trip], out_dir: Union[str, Path]) -> list[Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for trip in trips:
        path = out_dir / trip_filename(trip)
        write_trip_csv(trip, path)
        written.append(path)
    return written


def load_trip_store(store_dir: Union[str, Path]) -> list[Trip]:
    """Read a qualified-trip store back; kinematics are derived if a file lacks them."""
    parsed = parse_trip_files(collect_inputs(store_dir))
    return [derive_kinematics(t) for t in parsed.trips if t.key not in parsed.malformed]
