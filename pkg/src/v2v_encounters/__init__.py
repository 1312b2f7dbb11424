"""Mine vehicle-to-vehicle encounters from 10 Hz GPS trip logs and cluster them
into car-following, intersection and by-passing scenarios."""

from .clustering import AccuracyReport, ClusteringResult, evaluate_accuracy, kmedoids
from .encounters import FilterParams, VehicleEncounter, coarse_filter, coarse_interval, fine_filter, find_encounters
from .errors import (
    DegenerateBearing,
    EmptySeries,
    EncounterError,
    InsufficientSamples,
    InvalidK,
    InvalidMatrix,
    MalformedInput,
    MissingLabel,
    UnsortedInput,
)
from .features import FeatureSeries, dtw_distance, dtw_matrix, extract_features, normalize
from .geo import GpsSample, Trip, derive_kinematics, haversine_distance, initial_bearing
from .ingest import QualificationReport, RegionBounds, continuity_check, parse_trip_file, qualify_trips, region_filter
from .matcher import MatchStats, TripPairCandidate, TripSpan, brute_force_match, sort_trips, sweep_match

__version__ = "0.1.0"
