"""Pipeline configuration: defaults < config file < command-line flags."""

from __future__ import annotations

import dataclasses
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping, Optional, Union

import numpy as np

from .encounters import FilterParams
from .features import DEFAULT_MAX_POINTS, NORMALIZATIONS
from .ingest import MIN_TRIP_SAMPLES, RegionBounds
from .matcher import DEFAULT_MARGIN_M

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

_STAGES = {"synth": 1, "cluster": 2, "bench": 3}


@dataclass(frozen=True)
class DtwOptions:
    window: Optional[int] = None
    max_points: int = DEFAULT_MAX_POINTS
    normalization: str = "sum_len"

    def __post_init__(self):
        if self.window is not None and self.window < 0:
            raise ValueError("DTW window must be >= 0")
        if self.max_points < 2:
            raise ValueError("max_points must be >= 2")
        if self.normalization not in NORMALIZATIONS:
            raise ValueError(f"normalization must be one of {NORMALIZATIONS}")


@dataclass(frozen=True)
class ClusterOptions:
    k: int = 3
    max_iter: int = 100

    def __post_init__(self):
        if self.k < 1 or self.max_iter < 1:
            raise ValueError("k and max_iter must be >= 1")


@dataclass(frozen=True)
class PipelineConfig:
    region: RegionBounds = field(default_factory=RegionBounds)
    filter: FilterParams = field(default_factory=FilterParams)
    dtw: DtwOptions = field(default_factory=DtwOptions)
    cluster: ClusterOptions = field(default_factory=ClusterOptions)
    margin: float = DEFAULT_MARGIN_M
    min_trip_samples: int = MIN_TRIP_SAMPLES
    seed: int = 0
    threads: int = 1
    skip_coarse: bool = False
    oracle_check: bool = False

    def sub_seed(self, stage: str) -> int:
        return derive_seed(self.seed, stage)


def derive_seed(seed: int, stage: str) -> int:
    """Stable per-stage seed derived from the single pipeline seed."""
    return int(np.random.SeedSequence([seed, _STAGES[stage]]).generate_state(1)[0])


def load_config_file(path: Union[str, Path]) -> dict:
    with open(path, "rb") as fh:
        return tomllib.load(fh)


_SECTIONS = {"region": RegionBounds, "filter": FilterParams, "dtw": DtwOptions, "cluster": ClusterOptions}


def build_config(file_values: Optional[Mapping[str, Any]] = None, overrides: Optional[Mapping[str, Any]] = None) -> PipelineConfig:
    """Merge config-file values and flag overrides onto the defaults.

    Both mappings use the same shape: top-level scalars plus optional
    ``region``/``filter``/``dtw``/``cluster`` tables. ``None`` override values
    are ignored so unset flags fall through.

    Raises:
        ValueError: on unknown keys or values violating a section's invariants.
    """
    merged: dict[str, Any] = {}
    for source in (file_values or {}, overrides or {}):
        for key, value in source.items():
            if key in _SECTIONS:
                section = merged.setdefault(key, {})
                section.update({k: v for k, v in (value or {}).items() if v is not None})
            elif value is not None:
                merged[key] = value

    known = {f.name for f in dataclasses.fields(PipelineConfig)}
    unknown = set(merged) - known
    if unknown:
        raise ValueError(f"unknown config key(s): {', '.join(sorted(unknown))}")
    kwargs = {}
    for key, value in merged.items():
        if key in _SECTIONS:
            cls = _SECTIONS[key]
            fields = {f.name for f in dataclasses.fields(cls)}
            bad = set(value) - fields
            if bad:
                raise ValueError(f"unknown [{key}] key(s): {', '.join(sorted(bad))}")
            kwargs[key] = cls(**value)
        else:
            kwargs[key] = value
    return PipelineConfig(**kwargs)
