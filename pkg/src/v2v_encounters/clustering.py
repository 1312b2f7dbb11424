"""k-medoids over a precomputed distance matrix, and per-cluster accuracy scoring.

DTW gives no vector space to average in, so cluster representatives are
actual encounters (medoids) and only pairwise distances are needed.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

import numpy as np

from .errors import InvalidK, InvalidMatrix, MissingLabel


@dataclass
class ClusteringResult:
    k: int
    assignment: dict[str, int]
    medoids: list[str]
    objective: float
    iterations: int
    seed: int
    objective_history: list[float] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "seed": self.seed,
            "objective": self.objective,
            "iterations": self.iterations,
            "objective_history": list(self.objective_history),
            "medoids": list(self.medoids),
            "assignment": dict(self.assignment),
        }


@dataclass
class ClusterAccuracy:
    cluster: int
    majority_label: Optional[str]
    true_count: int
    false_count: int

    @property
    def accuracy(self) -> float:
        total = self.true_count + self.false_count
        return self.true_count / total if total else 0.0


@dataclass
class AccuracyReport:
    per_cluster: list[ClusterAccuracy]

    def to_dict(self) -> dict:
        return {
            "per_cluster": [
                {
                    "cluster": c.cluster,
                    "majority_label": c.majority_label,
                    "true_count": c.true_count,
                    "false_count": c.false_count,
                    "accuracy": c.accuracy,
                }
                for c in self.per_cluster
            ]
        }


def validate_matrix(matrix, atol: float = 1e-9) -> np.ndarray:
    m = np.asarray(matrix, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise InvalidMatrix(f"distance matrix must be square, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise InvalidMatrix("distance matrix has non-finite entries")
    if np.any(m < 0):
        raise InvalidMatrix("distance matrix has negative entries")
    if np.any(np.abs(np.diag(m)) > atol):
        raise InvalidMatrix("distance matrix diagonal is not zero")
    if not np.allclose(m, m.T, rtol=0.0, atol=atol):
        raise InvalidMatrix("distance matrix is not symmetric")
    return m


def _assign(m: np.ndarray, medoids: np.ndarray) -> np.ndarray:
    # argmin returns the first minimum, i.e. the lower cluster index on ties
    labels = np.argmin(m[:, medoids], axis=1)
    labels[medoids] = np.arange(len(medoids))
    return labels


def _objective(m: np.ndarray, medoids: np.ndarray, labels: np.ndarray) -> float:
    return float(m[np.arange(len(labels)), medoids[labels]].sum())


def seed_medoids(m: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """Farthest-point seeding after a uniformly random first pick."""
    n = len(m)
    chosen = [int(rng.integers(n))]
    nearest = m[chosen[0]].copy()
    for _ in range(1, k):
        # chosen points have distance 0 already; mask them out in case of duplicates
        cand = nearest.copy()
        cand[chosen] = -1.0
        nxt = int(np.argmax(cand))
        chosen.append(nxt)
        nearest = np.minimum(nearest, m[nxt])
    return np.array(chosen, dtype=np.int64)


def kmedoids(
    matrix,
    k: int,
    seed: int = 0,
    max_iter: int = 100,
    ids: Optional[Sequence[str]] = None,
) -> ClusteringResult:
    """Alternating k-medoids (assign to nearest medoid, re-pick medoid per cluster).

    Stops when an iteration leaves the assignment unchanged or after
    ``max_iter`` iterations. A cluster keeps its current medoid unless another
    member has strictly lower total distance; among equals the lowest index
    wins. Deterministic for a given ``(matrix, k, seed)``.

    Raises:
        InvalidK: unless 1 <= k <= n.
        InvalidMatrix: for non-square, asymmetric, negative or non-zero-diagonal input.
    """
    m = validate_matrix(matrix)
    n = len(m)
    if not 1 <= k <= n:
        raise InvalidK(f"k={k} is invalid for {n} points")
    ids = [str(i) for i in range(n)] if ids is None else list(ids)
    if len(ids) != n:
        raise ValueError("ids length does not match matrix size")

    rng = np.random.default_rng(seed)
    medoids = seed_medoids(m, k, rng)
    labels = _assign(m, medoids)
    history = [_objective(m, medoids, labels)]
    iterations = 0
    while iterations < max_iter:
        iterations += 1
        new_medoids = medoids.copy()
        for c in range(k):
            members = np.flatnonzero(labels == c)
            costs = m[np.ix_(members, members)].sum(axis=1)
            best = members[int(np.argmin(costs))]
            current_cost = costs[np.flatnonzero(members == medoids[c])[0]]
            if costs.min() < current_cost:
                new_medoids[c] = best
        medoids = new_medoids
        new_labels = _assign(m, medoids)
        history.append(_objective(m, medoids, new_labels))
        changed = not np.array_equal(new_labels, labels)
        labels = new_labels
        if not changed:
            break

    return ClusteringResult(
        k=k,
        assignment={ids[i]: int(labels[i]) for i in range(n)},
        medoids=[ids[i] for i in medoids],
        objective=history[-1],
        iterations=iterations,
        seed=seed,
        objective_history=history,
    )


def recompute_objective(result: ClusteringResult, matrix, ids: Sequence[str]) -> float:
    index = {e: i for i, e in enumerate(ids)}
    m = np.asarray(matrix)
    return float(sum(m[index[e], index[result.medoids[c]]] for e, c in result.assignment.items()))


def evaluate_accuracy(result: ClusteringResult, labels: Mapping[str, str]) -> AccuracyReport:
    """Per-cluster accuracy = true / (true + false) against each cluster's majority label.

    Majority ties go to the alphabetically first label.

    Raises:
        MissingLabel: if a clustered encounter has no label.
    """
    members: dict[int, list[str]] = {c: [] for c in range(result.k)}
    for enc, c in result.assignment.items():
        if enc not in labels:
            raise MissingLabel(f"no label for encounter {enc}")
        members[c].append(labels[enc])
    per_cluster = []
    for c in range(result.k):
        counts = Counter(members[c])
        if not counts:
            per_cluster.append(ClusterAccuracy(c, None, 0, 0))
            continue
        majority = min(counts, key=lambda lab: (-counts[lab], lab))
        true = counts[majority]
        per_cluster.append(ClusterAccuracy(c, majority, true, len(members[c]) - true))
    return AccuracyReport(per_cluster)
