"""Encounter shape signatures and DTW similarity between them.

A signature is the per-tick pair (relative distance L in meters, heading
difference theta in degrees folded into [0, 180]). Signatures are scaled to
roughly unit range before DTW so neither component dominates the cost.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

import numba
import numpy as np

from .encounters import VehicleEncounter
from .errors import EmptySeries

DISTANCE_SCALE_M = 100.0
THETA_SCALE_DEG = 180.0
DEFAULT_MAX_POINTS = 600

NORMALIZATIONS = ("none", "sum_len")


@dataclass(frozen=True, eq=False)
class FeatureSeries:
    encounter_ref: str
    timestamps: np.ndarray
    distance: np.ndarray  # L, meters
    theta: np.ndarray  # degrees in [0, 180]

    def __len__(self) -> int:
        return len(self.distance)

    @property
    def points(self) -> np.ndarray:
        return np.column_stack([self.distance, self.theta])


def heading_difference(h_a, h_b) -> np.ndarray:
    """Absolute heading difference folded onto [0, 180] degrees."""
    delta = np.abs(np.asarray(h_a, dtype=np.float64) - np.asarray(h_b, dtype=np.float64)) % 360.0
    return np.minimum(delta, 360.0 - delta)


def extract_features(enc: VehicleEncounter) -> FeatureSeries:
    return FeatureSeries(
        encounter_ref=enc.id,
        timestamps=enc.timestamps,
        distance=np.asarray(enc.distance, dtype=np.float64),
        theta=heading_difference(enc.heading_a, enc.heading_b),
    )


def normalize(fs: FeatureSeries) -> np.ndarray:
    """(n, 2) array of (L / 100 m, theta / 180 deg)."""
    return np.column_stack([fs.distance / DISTANCE_SCALE_M, fs.theta / THETA_SCALE_DEG])


def decimate(points: np.ndarray, max_points: Optional[int] = DEFAULT_MAX_POINTS) -> tuple[np.ndarray, float]:
    """Uniformly thin a series down to ``max_points``; returns (series, factor)."""
    n = len(points)
    if max_points is None or n <= max_points:
        return points, 1.0
    idx = np.round(np.linspace(0, n - 1, max_points)).astype(np.int64)
    return points[idx], n / max_points


@numba.njit(cache=True, nogil=True)
def _dtw_cost(x, y, band):
    n = x.shape[0]
    m = y.shape[0]
    inf = np.inf
    prev = np.full(m + 1, inf)
    curr = np.full(m + 1, inf)
    prev[0] = 0.0
    for i in range(1, n + 1):
        curr[:] = inf
        lo = 1
        hi = m
        if band >= 0:
            lo = max(1, i - band)
            hi = min(m, i + band)
        for j in range(lo, hi + 1):
            d0 = x[i - 1, 0] - y[j - 1, 0]
            d1 = x[i - 1, 1] - y[j - 1, 1]
            best = prev[j - 1]
            if prev[j] < best:
                best = prev[j]
            if curr[j - 1] < best:
                best = curr[j - 1]
            curr[j] = math.sqrt(d0 * d0 + d1 * d1) + best
        prev, curr = curr, prev
    return prev[m]


def dtw_distance(s1, s2, window: Optional[int] = None, normalization: str = "none") -> float:
    """Minimum cumulative Euclidean cost over monotone warping paths.

    Steps are (1,0), (0,1), (1,1), unweighted, anchored at both ends. With
    ``window`` the path stays within a Sakoe-Chiba band of that half-width,
    widened to the length difference so the end cell remains reachable.
    ``normalization="sum_len"`` divides the cost by len(s1) + len(s2).

    Args:
        s1, s2: (n, 2) arrays of normalized feature points.
    """
    if len(s1) == 0 or len(s2) == 0:
        raise EmptySeries("DTW needs two non-empty series")
    x = np.ascontiguousarray(s1, dtype=np.float64)
    y = np.ascontiguousarray(s2, dtype=np.float64)
    if x.ndim != 2 or y.ndim != 2 or x.shape[1] != 2 or y.shape[1] != 2:
        raise ValueError("feature points must be 2-D")
    band = -1 if window is None else max(int(window), abs(len(x) - len(y)))
    cost = float(_dtw_cost(x, y, band))
    if normalization == "sum_len":
        return cost / (len(x) + len(y))
    if normalization != "none":
        raise ValueError(f"unknown normalization {normalization!r}")
    return cost


def dtw_matrix(
    series: Sequence[np.ndarray],
    window: Optional[int] = None,
    normalization: str = "none",
    threads: int = 1,
) -> np.ndarray:
    """Symmetric pairwise DTW matrix; each worker owns whole rows of the upper triangle."""
    n = len(series)
    out = np.zeros((n, n), dtype=np.float64)

    def row(i):
        for j in range(i + 1, n):
            out[i, j] = dtw_distance(series[i], series[j], window, normalization)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(row, range(n)))
    else:
        for i in range(n):
            row(i)
    iu = np.triu_indices(n, 1)
    out[(iu[1], iu[0])] = out[iu]
    return out
